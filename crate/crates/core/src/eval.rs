//! Gauge alignment and rotation-error metrics.
//!
//! Estimates are compared to ground truth after removing the global gauge:
//! `S* = argmin_S Σ ‖S − R_iᵀ R̂_i‖²_F`, whose closed form is the SO(3)
//! projection of `Σ R_iᵀ R̂_i`. Aligned estimates are `R_i S*`.

use std::collections::BTreeMap;

use nalgebra::Matrix3;

use crate::error::{invalid, Result};
use crate::so3::{deg, project_to_so3, riemannian_distance, Rotation};

/// Thresholds, in degrees, reported when none are requested.
pub const DEFAULT_THRESHOLDS_DEG: [f64; 3] = [3.0, 5.0, 10.0];

fn check_pair(estimates: &[Rotation], ground_truth: &[Rotation]) -> Result<()> {
    if estimates.is_empty() {
        return Err(invalid("no rotations to compare"));
    }
    if estimates.len() != ground_truth.len() {
        return Err(invalid(format!(
            "{} estimates vs {} ground-truth rotations",
            estimates.len(),
            ground_truth.len()
        )));
    }
    Ok(())
}

/// Optimal gauge `S*` mapping estimates onto ground truth.
pub fn align(estimates: &[Rotation], ground_truth: &[Rotation]) -> Result<Rotation> {
    check_pair(estimates, ground_truth)?;
    let sum: Matrix3<f64> = estimates
        .iter()
        .zip(ground_truth)
        .map(|(r, g)| r.matrix().transpose() * g.matrix())
        .sum();
    project_to_so3(&sum)
}

/// Σ ‖S − R_iᵀ R̂_i‖²_F, the objective minimized by [`align`].
pub fn alignment_objective(s: &Rotation, estimates: &[Rotation], ground_truth: &[Rotation]) -> f64 {
    estimates
        .iter()
        .zip(ground_truth)
        .map(|(r, g)| (s.matrix() - r.matrix().transpose() * g.matrix()).norm_squared())
        .sum()
}

/// Angle of `R̂ᵀ R S`, i.e. arccos((tr(R̂ᵀ R S) − 1)/2).
///
/// Evaluated through the quaternion half-angle so that errors far below
/// 1e-8 rad stay resolvable; see [`rotation_error_arccos`] for the trace form.
pub fn rotation_error(estimate: &Rotation, gauge: &Rotation, truth: &Rotation) -> f64 {
    riemannian_distance(&(*estimate * *gauge), truth)
}

/// Trace form of [`rotation_error`] with the arccos argument clamped to [−1, 1].
/// Loses resolution below roughly 2e-8 rad.
pub fn rotation_error_arccos(estimate: &Rotation, gauge: &Rotation, truth: &Rotation) -> f64 {
    let t = (truth.matrix().transpose() * estimate.matrix() * gauge.matrix()).trace();
    ((t - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedErrorStats {
    /// Radians, one per camera.
    pub per_camera_errors: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    /// Fraction of cameras with error ≤ threshold, keyed by threshold in degrees.
    pub accuracy: Vec<(f64, f64)>,
    pub gauge: Rotation,
}

impl AlignedErrorStats {
    pub fn accuracy_at(&self, threshold_deg: f64) -> Option<f64> {
        self.accuracy
            .iter()
            .find(|(t, _)| *t == threshold_deg)
            .map(|&(_, a)| a)
    }

    pub fn accuracy_map(&self) -> BTreeMap<String, f64> {
        self.accuracy.iter().map(|(t, a)| (format!("{t}"), *a)).collect()
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Aligned per-camera errors and their summary statistics. Thresholds are
/// reported in ascending order.
pub fn error_stats(estimates: &[Rotation], ground_truth: &[Rotation], thresholds_deg: &[f64]) -> Result<AlignedErrorStats> {
    let gauge = align(estimates, ground_truth)?;
    let errors: Vec<f64> = estimates
        .iter()
        .zip(ground_truth)
        .map(|(r, g)| rotation_error(r, &gauge, g))
        .collect();
    summarize(errors, gauge, thresholds_deg)
}

/// Mean, median and accuracy of already aligned per-camera errors (radians).
pub fn summarize(errors: Vec<f64>, gauge: Rotation, thresholds_deg: &[f64]) -> Result<AlignedErrorStats> {
    if errors.is_empty() {
        return Err(invalid("no errors to summarize"));
    }
    if let Some(t) = thresholds_deg.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(invalid(format!("invalid accuracy threshold {t}")));
    }
    let mut thresholds = thresholds_deg.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let accuracy = thresholds
        .into_iter()
        .map(|t| {
            let limit = deg(t);
            let hits = errors.iter().filter(|&&e| e <= limit).count();
            (t, hits as f64 / errors.len() as f64)
        })
        .collect();
    Ok(AlignedErrorStats {
        mean: mean(&errors),
        median: median(&errors),
        per_camera_errors: errors,
        accuracy,
        gauge,
    })
}

/// (1/N) Σ ‖R_i S* − R̂_i‖_F, the Frobenius reading of the alignment loss.
pub fn alignment_loss(estimates: &[Rotation], ground_truth: &[Rotation]) -> Result<f64> {
    let s = align(estimates, ground_truth)?;
    let total: f64 = estimates
        .iter()
        .zip(ground_truth)
        .map(|(r, g)| (r.matrix() * s.matrix() - g.matrix()).norm())
        .sum();
    Ok(total / estimates.len() as f64)
}
