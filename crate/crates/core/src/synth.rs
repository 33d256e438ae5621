//! Synthetic confidence graphs with known ground truth.
//!
//! A scene draws uniform absolute rotations, picks a graph topology, marks a
//! fixed fraction of edges as outliers (uniformly random relative rotations),
//! perturbs the rest with isotropic tangent-space noise and finally assigns a
//! confidence to every edge from one of several confidence models.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::eval::{mean, median};
use crate::graph::{Connectivity, Edge, EpipolarConfidenceGraph};
use crate::so3::{deg, riemannian_distance, Rotation};

/// Erdős–Rényi draws attempted before giving up on connectivity.
pub const ERDOS_MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    Complete,
    /// Each pair independently with probability `p`.
    Erdos(f64),
    /// Pairs whose indices differ by at most `w`, as in sequential capture.
    ChainWindow(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfidenceModel {
    /// 1 for inliers, `eps` for outliers.
    Oracle { eps: f64 },
    /// `exp(−err² / 2 scale²) + U(−jitter, jitter)`, clamped to [0, 1].
    Informative { scale: f64, jitter: f64 },
    Constant(f64),
    /// Uniform on [0, 1], independent of the error.
    Adversarial,
}

impl ConfidenceModel {
    pub fn oracle() -> Self {
        Self::Oracle { eps: 0.01 }
    }

    pub fn informative() -> Self {
        Self::Informative {
            scale: deg(10.0),
            jitter: 0.05,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Oracle { .. } => "oracle",
            Self::Informative { .. } => "informative",
            Self::Constant(_) => "constant",
            Self::Adversarial => "adversarial",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Oracle { eps } => (0.0..=1.0).contains(&eps),
            Self::Informative { scale, jitter } => scale > 0.0 && scale.is_finite() && (0.0..=1.0).contains(&jitter),
            Self::Constant(c) => (0.0..=1.0).contains(&c),
            Self::Adversarial => true,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid confidence model parameters {self:?}")))
        }
    }

    fn assign<R: Rng + ?Sized>(&self, error: f64, outlier: bool, rng: &mut R) -> f64 {
        match *self {
            Self::Oracle { eps } => {
                if outlier {
                    eps
                } else {
                    1.0
                }
            }
            Self::Informative { scale, jitter } => {
                let base = (-error * error / (2.0 * scale * scale)).exp();
                let noise = if jitter > 0.0 {
                    rng.random_range(-jitter..=jitter)
                } else {
                    0.0
                };
                (base + noise).clamp(0.0, 1.0)
            }
            Self::Constant(c) => c,
            Self::Adversarial => rng.random_range(0.0..=1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSceneSpec {
    pub n: usize,
    pub topology: Topology,
    /// Per-axis standard deviation of inlier tangent noise, radians.
    pub noise_sigma: f64,
    pub outlier_edge_fraction: f64,
    pub confidence_model: ConfidenceModel,
    pub seed: u64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            n: 7,
            topology: Topology::Complete,
            noise_sigma: deg(5.0),
            outlier_edge_fraction: 0.0,
            confidence_model: ConfidenceModel::informative(),
            seed: 0,
        }
    }
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("need at least 2 cameras, got {}", self.n)));
        }
        match self.topology {
            Topology::Erdos(p) if !(p > 0.0 && p <= 1.0) => {
                return Err(invalid(format!("edge probability must be in (0, 1], got {p}")))
            }
            Topology::ChainWindow(0) => return Err(invalid("chain window must be >= 1")),
            _ => {}
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if !(0.0..=1.0).contains(&self.outlier_edge_fraction) {
            return Err(invalid(format!(
                "outlier fraction must be in [0, 1], got {}",
                self.outlier_edge_fraction
            )));
        }
        self.confidence_model.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeLabel {
    Inlier,
    Outlier,
}

impl EdgeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::Inlier => "inlier",
            EdgeLabel::Outlier => "outlier",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    /// Ground truth is always populated.
    pub graph: EpipolarConfidenceGraph,
    /// Parallel to `graph.edges()`.
    pub edge_labels: Vec<EdgeLabel>,
    /// ℜ(R_ij, R̂_j R̂_iᵀ) per edge, parallel to `graph.edges()`.
    pub true_edge_errors: Vec<f64>,
    pub confidence_model: ConfidenceModel,
}

impl SyntheticScene {
    pub fn ground_truth(&self) -> &[Rotation] {
        self.graph.ground_truth().expect("synthetic scenes carry ground truth")
    }

    pub fn outlier_count(&self) -> usize {
        self.edge_labels.iter().filter(|&&l| l == EdgeLabel::Outlier).count()
    }
}

fn topology_pairs<R: Rng + ?Sized>(n: usize, topology: Topology, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let all = || (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)));
    match topology {
        Topology::Complete => Ok(all().collect()),
        Topology::ChainWindow(w) => Ok(all().filter(|&(i, j)| j - i <= w).collect()),
        Topology::Erdos(p) => {
            for _ in 0..ERDOS_MAX_ATTEMPTS {
                let pairs: Vec<_> = all().filter(|_| rng.random_bool(p)).collect();
                if Connectivity::from_edges(n, pairs.iter().copied()).is_connected() {
                    return Ok(pairs);
                }
            }
            Err(Error::Generation(format!(
                "no connected Erdos graph with n = {n}, p = {p} after {ERDOS_MAX_ATTEMPTS} attempts"
            )))
        }
    }
}

/// Draws a scene. Identical specs produce identical scenes.
pub fn generate(spec: &SyntheticSceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gt: Vec<Rotation> = (0..spec.n).map(|_| Rotation::random(&mut rng)).collect();
    let pairs = topology_pairs(spec.n, spec.topology, &mut rng)?;

    let outlier_count = (spec.outlier_edge_fraction * pairs.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let mut labels = vec![EdgeLabel::Inlier; pairs.len()];
    for &k in &order[..outlier_count] {
        labels[k] = EdgeLabel::Outlier;
    }

    let mut edges = Vec::with_capacity(pairs.len());
    let mut errors = Vec::with_capacity(pairs.len());
    for (&(i, j), &label) in pairs.iter().zip(&labels) {
        let truth = gt[j] * gt[i].transpose();
        let observed = match label {
            EdgeLabel::Outlier => Rotation::random(&mut rng),
            EdgeLabel::Inlier => truth.perturbed(spec.noise_sigma, &mut rng)?,
        };
        let err = riemannian_distance(&observed, &truth);
        let c = spec
            .confidence_model
            .assign(err, label == EdgeLabel::Outlier, &mut rng);
        edges.push(Edge::new(i, j, observed, c));
        errors.push(err);
    }
    Ok(SyntheticScene {
        graph: EpipolarConfidenceGraph::build(spec.n, edges)?.with_ground_truth(gt)?,
        edge_labels: labels,
        true_edge_errors: errors,
        confidence_model: spec.confidence_model,
    })
}

/// Appends `k` cameras unrelated to the scene: each new vertex is joined to
/// every existing vertex (original and previously appended) by a uniformly
/// random relative rotation, labelled outlier, with confidences drawn from
/// the scene's confidence model. Original edges are left untouched.
pub fn corrupt_with_outlier_vertices(scene: &SyntheticScene, k: usize, seed: u64) -> Result<SyntheticScene> {
    if k == 0 {
        return Ok(scene.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n0 = scene.graph.n_vertices();
    let mut gt = scene.ground_truth().to_vec();
    gt.extend((0..k).map(|_| Rotation::random(&mut rng)));

    let mut edges = scene.graph.edges().to_vec();
    let mut labels = scene.edge_labels.clone();
    let mut errors = scene.true_edge_errors.clone();
    for v in n0..n0 + k {
        for u in 0..v {
            let observed = Rotation::random(&mut rng);
            let err = riemannian_distance(&observed, &(gt[v] * gt[u].transpose()));
            let c = scene.confidence_model.assign(err, true, &mut rng);
            edges.push(Edge::new(u, v, observed, c));
            labels.push(EdgeLabel::Outlier);
            errors.push(err);
        }
    }
    Ok(SyntheticScene {
        graph: EpipolarConfidenceGraph::build(n0 + k, edges)?.with_ground_truth(gt)?,
        edge_labels: labels,
        true_edge_errors: errors,
        confidence_model: scene.confidence_model,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Radians; `None` for empty bins.
    pub mean_error: Option<f64>,
    pub median_error: Option<f64>,
}

/// Groups edges into `n_bins` equal confidence intervals over [0, 1] and
/// summarizes the true relative-rotation error in each. Confidence 1 falls in
/// the last bin.
pub fn confidence_error_table(scene: &SyntheticScene, n_bins: usize) -> Result<Vec<ConfidenceBin>> {
    if n_bins == 0 {
        return Err(invalid("need at least one bin"));
    }
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for (e, &err) in scene.graph.edges().iter().zip(&scene.true_edge_errors) {
        let b = ((e.confidence * n_bins as f64).floor() as usize).min(n_bins - 1);
        buckets[b].push(err);
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(b, errs)| ConfidenceBin {
            lower: b as f64 / n_bins as f64,
            upper: (b + 1) as f64 / n_bins as f64,
            count: errs.len(),
            mean_error: (!errs.is_empty()).then(|| mean(&errs)),
            median_error: (!errs.is_empty()).then(|| median(&errs)),
        })
        .collect())
}

/// Sidecar text: `LABEL <i> <j> <inlier|outlier> <true_error_rad>` per edge.
pub fn serialize_labels(scene: &SyntheticScene) -> String {
    let mut out = String::new();
    for ((e, label), err) in scene
        .graph
        .edges()
        .iter()
        .zip(&scene.edge_labels)
        .zip(&scene.true_edge_errors)
    {
        writeln!(out, "LABEL {} {} {} {err:.16e}", e.i, e.j, label.as_str()).unwrap();
    }
    out
}

/// One parsed `LABEL` record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRecord {
    pub i: usize,
    pub j: usize,
    pub label: EdgeLabel,
    pub true_error: f64,
}

pub fn parse_labels(text: &str) -> Result<Vec<LabelRecord>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let err = |message: &str| Error::Parse {
            line,
            message: message.to_string(),
        };
        if fields[0] != "LABEL" || fields.len() != 5 {
            return Err(err("expected `LABEL <i> <j> <inlier|outlier> <error>`"));
        }
        let i = fields[1].parse().map_err(|_| err("invalid vertex index"))?;
        let j = fields[2].parse().map_err(|_| err("invalid vertex index"))?;
        let label = match fields[3] {
            "inlier" => EdgeLabel::Inlier,
            "outlier" => EdgeLabel::Outlier,
            _ => return Err(err("label must be inlier or outlier")),
        };
        let true_error = fields[4].parse().map_err(|_| err("invalid error value"))?;
        out.push(LabelRecord { i, j, label, true_error });
    }
    Ok(out)
}
