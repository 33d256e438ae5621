//! Lie-algebra weighted least squares for rotation averaging.
//!
//! Each iteration linearizes every edge residual
//! `Δb_ij = log(R̃_jᵀ R_ij R̃_i) ≈ Δr_j − Δr_i`, solves the weighted normal
//! equations `(BᵀWB) Δr = BᵀW Δb` and applies `R̃_i ← R̃_i · exp(Δr_i)`.
//! [`cao_solve`] weights edges by their confidences, which stay fixed, so the
//! Laplacian is factored once. [`irls_solve`] re-derives weights from a robust
//! kernel before every step.

use nalgebra::Vector3;

use crate::error::{invalid, Result};
use crate::graph::{Connectivity, Edge, EdgeSource};
use crate::init::select_root;
use crate::so3::{deg, exp_unchecked, log_map, Rotation};
use crate::sparse::{LaplacianFactor, Regularization};

/// Gauge fixing for the normal equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Anchor {
    /// Hold the spanning-tree root (see [`select_root`]) fixed.
    FixRoot,
    /// Hold a specific vertex fixed.
    FixVertex(usize),
    /// Regularize every update with `lambda · ‖Δr‖²` instead of fixing a vertex.
    Tikhonov(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub max_iterations: usize,
    pub anchor: Anchor,
    /// Stop as soon as every positively weighted residual is below this (radians).
    pub residual_tolerance: f64,
    pub irls_max_iterations: usize,
    pub irls_rel_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iterations: 3,
            anchor: Anchor::FixRoot,
            residual_tolerance: 1e-10,
            irls_max_iterations: 20,
            irls_rel_tol: 1e-8,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be >= 1"));
        }
        if self.irls_max_iterations == 0 {
            return Err(invalid("irls_max_iterations must be >= 1"));
        }
        if let Anchor::Tikhonov(l) = self.anchor {
            if !(l > 0.0 && l.is_finite()) {
                return Err(invalid(format!("Tikhonov lambda must be > 0, got {l}")));
            }
        }
        if !(self.residual_tolerance >= 0.0) || !(self.irls_rel_tol >= 0.0) {
            return Err(invalid("tolerances must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelKind {
    /// Confidence-aware loss `c·x²`; weights are the edge confidences.
    Confidence,
    L2,
    LHalf,
    Cauchy,
    GemanMcClure,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Confidence,
        KernelKind::L2,
        KernelKind::LHalf,
        KernelKind::Cauchy,
        KernelKind::GemanMcClure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Confidence => "confidence",
            KernelKind::L2 => "l2",
            KernelKind::LHalf => "l_half",
            KernelKind::Cauchy => "cauchy",
            KernelKind::GemanMcClure => "geman_mcclure",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Clamp on the ℓ1/2 residual to keep its IRLS weight finite.
pub const L_HALF_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustKernel {
    pub kind: KernelKind,
    /// Scale parameter for Cauchy and Geman–McClure, radians.
    pub alpha: f64,
}

impl RobustKernel {
    pub fn new(kind: KernelKind) -> Self {
        Self { kind, alpha: deg(5.0) }
    }

    pub fn with_alpha(kind: KernelKind, alpha: f64) -> Result<Self> {
        let k = Self { kind, alpha };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, KernelKind::Cauchy | KernelKind::GemanMcClure) && !(self.alpha > 0.0) {
            return Err(invalid(format!("kernel scale alpha must be > 0, got {}", self.alpha)));
        }
        Ok(())
    }

    /// ρ(x) for residual angle `x`; `confidence` only enters the CAL kernel.
    pub fn loss(&self, x: f64, confidence: f64) -> f64 {
        let a2 = self.alpha * self.alpha;
        match self.kind {
            KernelKind::Confidence => confidence * x * x,
            KernelKind::L2 => 0.5 * x * x,
            KernelKind::LHalf => 2.0 * x.sqrt(),
            KernelKind::Cauchy => 0.5 * a2 * (x * x / a2).ln_1p(),
            KernelKind::GemanMcClure => x * x / (2.0 * (a2 + x * x)),
        }
    }

    /// IRLS weight ρ'(x)/x.
    pub fn weight(&self, x: f64, confidence: f64) -> f64 {
        let a2 = self.alpha * self.alpha;
        match self.kind {
            KernelKind::Confidence => confidence,
            KernelKind::L2 => 1.0,
            KernelKind::LHalf => x.max(L_HALF_EPSILON).powf(-1.5),
            KernelKind::Cauchy => 1.0 / (1.0 + x * x / a2),
            KernelKind::GemanMcClure => {
                let d = a2 + x * x;
                a2 / (d * d)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub rotations: Vec<Rotation>,
    /// Objective at the initialization and after every iteration. For
    /// [`cao_solve`] this is the confidence-aware loss; for [`irls_solve`] the
    /// kernel objective Σρ(x_ij).
    pub loss_history: Vec<f64>,
    /// Largest positively weighted residual norm at the same points.
    pub max_residual_history: Vec<f64>,
    pub iterations_run: usize,
    pub anchor_vertex: Option<usize>,
    pub diagnostics: Vec<String>,
}

impl SolveReport {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("history includes the initialization")
    }
}

/// Edge source whose confidences are multiplied by a constant factor. The
/// factor may take weights outside [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct ScaledConfidences<S> {
    pub inner: S,
    pub factor: f64,
}

impl<S: EdgeSource> EdgeSource for ScaledConfidences<S> {
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    fn visit_edges(&self, f: &mut dyn FnMut(&Edge)) -> Result<()> {
        let factor = self.factor;
        self.inner.visit_edges(&mut |e| {
            f(&Edge {
                confidence: e.confidence * factor,
                ..*e
            })
        })
    }
}

/// `log(R̃_jᵀ R_ij R̃_i)`; its norm is ℜ(R_ij, R̃_j R̃_iᵀ).
fn edge_residual(e: &Edge, rotations: &[Rotation]) -> Vector3<f64> {
    let delta = rotations[e.j].transpose() * e.rotation * rotations[e.i];
    log_map(&delta)
}

fn check_rotations<S: EdgeSource + ?Sized>(src: &S, rotations: &[Rotation]) -> Result<()> {
    if rotations.len() != src.vertex_count() {
        return Err(invalid(format!(
            "{} rotations given for {} vertices",
            rotations.len(),
            src.vertex_count()
        )));
    }
    Ok(())
}

/// Confidence-aware loss Σ c_ij · ℜ²(R_ij, R_j R_iᵀ).
pub fn cal_loss<S: EdgeSource + ?Sized>(src: &S, rotations: &[Rotation]) -> Result<f64> {
    check_rotations(src, rotations)?;
    let mut total = 0.0;
    src.visit_edges(&mut |e| {
        total += e.confidence * edge_residual(e, rotations).norm_squared();
    })?;
    Ok(total)
}

/// Kernel objective Σ ρ(ℜ(R_ij, R_j R_iᵀ)).
pub fn kernel_loss<S: EdgeSource + ?Sized>(src: &S, rotations: &[Rotation], kernel: &RobustKernel) -> Result<f64> {
    check_rotations(src, rotations)?;
    let mut total = 0.0;
    src.visit_edges(&mut |e| {
        total += kernel.loss(edge_residual(e, rotations).norm(), e.confidence);
    })?;
    Ok(total)
}

fn regularization<S: EdgeSource + ?Sized>(src: &S, anchor: Anchor) -> Result<(Regularization, Option<usize>)> {
    Ok(match anchor {
        Anchor::FixRoot => {
            let root = select_root(src)?;
            (Regularization::Fixed(root), Some(root))
        }
        Anchor::FixVertex(v) => {
            if v >= src.vertex_count() {
                return Err(invalid(format!("anchor vertex {v} out of range")));
            }
            (Regularization::Fixed(v), Some(v))
        }
        Anchor::Tikhonov(l) => (Regularization::Tikhonov(l), None),
    })
}

fn apply_update(rotations: &mut [Rotation], delta: &[Vector3<f64>], anchor: Option<usize>) {
    for (v, (r, d)) in rotations.iter_mut().zip(delta).enumerate() {
        if Some(v) != anchor {
            *r = *r * exp_unchecked(d);
        }
    }
}

/// Right-hand side `BᵀW Δb` plus objective and max residual over one pass.
struct Linearization {
    loss: f64,
    max_residual: f64,
    rhs: Vec<Vector3<f64>>,
}

fn linearize_confidence<S: EdgeSource + ?Sized>(src: &S, rotations: &[Rotation]) -> Result<Linearization> {
    let mut lin = Linearization {
        loss: 0.0,
        max_residual: 0.0,
        rhs: vec![Vector3::zeros(); src.vertex_count()],
    };
    src.visit_edges(&mut |e| {
        let db = edge_residual(e, rotations);
        let x2 = db.norm_squared();
        lin.loss += e.confidence * x2;
        if e.confidence > 0.0 {
            lin.max_residual = lin.max_residual.max(x2.sqrt());
            let w = db * e.confidence;
            lin.rhs[e.i] -= w;
            lin.rhs[e.j] += w;
        }
    })?;
    Ok(lin)
}

/// Confidence-aware optimization: up to `config.max_iterations` weighted
/// least-squares steps with the edge confidences as fixed weights.
pub fn cao_solve<S: EdgeSource + ?Sized>(src: &S, initial: &[Rotation], config: &SolveConfig) -> Result<SolveReport> {
    config.validate()?;
    check_rotations(src, initial)?;
    let n = src.vertex_count();

    let mut weighted = Vec::new();
    src.visit_edges(&mut |e| {
        if e.confidence > 0.0 {
            weighted.push((e.i, e.j, e.confidence));
        }
    })?;
    Connectivity::from_edges(n, weighted.iter().map(|&(i, j, _)| (i, j))).require_connected()?;

    let (reg, anchor_vertex) = regularization(src, config.anchor)?;
    let factor = LaplacianFactor::new(n, &weighted, reg)?;
    drop(weighted);

    let mut rotations = initial.to_vec();
    let mut lin = linearize_confidence(src, &rotations)?;
    let mut loss_history = vec![lin.loss];
    let mut max_residual_history = vec![lin.max_residual];
    let mut iterations_run = 0;
    while iterations_run < config.max_iterations && lin.max_residual >= config.residual_tolerance {
        let delta = factor.solve(&lin.rhs);
        apply_update(&mut rotations, &delta, anchor_vertex);
        iterations_run += 1;
        lin = linearize_confidence(src, &rotations)?;
        loss_history.push(lin.loss);
        max_residual_history.push(lin.max_residual);
    }
    Ok(SolveReport {
        rotations,
        loss_history,
        max_residual_history,
        iterations_run,
        anchor_vertex,
        diagnostics: Vec::new(),
    })
}

/// Weight given to edges that would otherwise leave the weighted graph disconnected.
pub const WEIGHT_FLOOR: f64 = 1e-6;

struct WeightedResiduals {
    loss: f64,
    max_residual: f64,
    edges: Vec<(usize, usize, f64, Vector3<f64>)>,
}

fn reweight<S: EdgeSource + ?Sized>(
    src: &S,
    rotations: &[Rotation],
    kernel: &RobustKernel,
) -> Result<WeightedResiduals> {
    let mut out = WeightedResiduals {
        loss: 0.0,
        max_residual: 0.0,
        edges: Vec::new(),
    };
    src.visit_edges(&mut |e| {
        let db = edge_residual(e, rotations);
        let x = db.norm();
        out.loss += kernel.loss(x, e.confidence);
        let w = kernel.weight(x, e.confidence);
        if w > 0.0 {
            out.max_residual = out.max_residual.max(x);
        }
        out.edges.push((e.i, e.j, w, db));
    })?;
    Ok(out)
}

/// Iteratively reweighted least squares under a robust kernel.
///
/// Every outer iteration recomputes `w_ij = ρ'(x_ij)/x_ij` from the current
/// residual angles and takes one weighted least-squares step. Stops when the
/// relative change of the kernel objective drops below `irls_rel_tol` or after
/// `irls_max_iterations` steps. The confidence kernel is exactly [`cao_solve`].
pub fn irls_solve<S: EdgeSource + ?Sized>(
    src: &S,
    initial: &[Rotation],
    kernel: &RobustKernel,
    config: &SolveConfig,
) -> Result<SolveReport> {
    kernel.validate()?;
    if kernel.kind == KernelKind::Confidence {
        return cao_solve(src, initial, config);
    }
    config.validate()?;
    check_rotations(src, initial)?;
    let n = src.vertex_count();

    let mut all_pairs = Vec::new();
    src.visit_edges(&mut |e| all_pairs.push((e.i, e.j)))?;
    Connectivity::from_edges(n, all_pairs.iter().copied()).require_connected()?;
    drop(all_pairs);

    let (reg, anchor_vertex) = regularization(src, config.anchor)?;
    let mut diagnostics = Vec::new();
    let mut rotations = initial.to_vec();
    let mut state = reweight(src, &rotations, kernel)?;
    let mut loss_history = vec![state.loss];
    let mut max_residual_history = vec![state.max_residual];
    let mut iterations_run = 0;
    while iterations_run < config.irls_max_iterations && state.max_residual >= config.residual_tolerance {
        let positive = Connectivity::from_edges(
            n,
            state.edges.iter().filter(|e| e.2 > 0.0).map(|e| (e.0, e.1)),
        );
        if !positive.is_connected() {
            let mut floored = 0;
            for e in &mut state.edges {
                if e.2 < WEIGHT_FLOOR {
                    e.2 = WEIGHT_FLOOR;
                    floored += 1;
                }
            }
            diagnostics.push(format!(
                "iteration {}: weighted graph disconnected, floored {floored} edge weights at {WEIGHT_FLOOR:e}",
                iterations_run + 1
            ));
        }
        let pattern: Vec<(usize, usize, f64)> = state.edges.iter().map(|&(i, j, w, _)| (i, j, w)).collect();
        let factor = LaplacianFactor::new(n, &pattern, reg)?;
        let mut rhs = vec![Vector3::zeros(); n];
        for &(i, j, w, db) in &state.edges {
            rhs[i] -= db * w;
            rhs[j] += db * w;
        }
        let delta = factor.solve(&rhs);
        apply_update(&mut rotations, &delta, anchor_vertex);
        iterations_run += 1;

        let previous = state.loss;
        state = reweight(src, &rotations, kernel)?;
        loss_history.push(state.loss);
        max_residual_history.push(state.max_residual);
        if (previous - state.loss).abs() <= config.irls_rel_tol * previous.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(SolveReport {
        rotations,
        loss_history,
        max_residual_history,
        iterations_run,
        anchor_vertex,
        diagnostics,
    })
}
