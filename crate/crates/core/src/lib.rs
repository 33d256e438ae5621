//! Confidence-aware rotation averaging.
//!
//! Recovers absolute camera rotations from a graph of relative rotations
//! whose edges carry confidences in [0, 1]:
//!
//! 1. [`init`] grows a maximum-confidence spanning tree and chains the
//!    relative rotations out from its root.
//! 2. [`solver::cao_solve`] refines the initialization with a few
//!    confidence-weighted least-squares steps in the Lie algebra;
//!    [`solver::irls_solve`] does the same under classic robust kernels.
//! 3. [`eval`] aligns the result to ground truth and reports errors.
//!
//! [`synth`] produces reproducible synthetic scenes for experiments.
//!
//! ```
//! use cara::eval::error_stats;
//! use cara::init::confidence_aware_initialization;
//! use cara::solver::cao_solve;
//! use cara::synth::{generate, SyntheticSceneSpec};
//! use cara::SolveConfig;
//!
//! let scene = generate(&SyntheticSceneSpec { n: 20, seed: 7, ..Default::default() })?;
//! let (_tree, initial) = confidence_aware_initialization(&scene.graph)?;
//! let report = cao_solve(&scene.graph, &initial, &SolveConfig::default())?;
//! let stats = error_stats(&report.rotations, scene.ground_truth(), &[3.0, 5.0, 10.0])?;
//! assert!(stats.mean.to_degrees() < 5.0);
//! # Ok::<(), cara::Error>(())
//! ```

pub mod error;
pub mod eval;
pub mod format;
pub mod graph;
pub mod init;
pub mod so3;
pub mod solver;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeSource, EpipolarConfidenceGraph};
pub use so3::{Rotation, TangentVector};
pub use solver::{Anchor, KernelKind, RobustKernel, SolveConfig, SolveReport};
