//! SO(3) primitives: the rotation type, exponential and logarithm maps,
//! geodesic distance, Euler angles, binned angle distributions, random
//! sampling and projection of arbitrary matrices onto the group.
//!
//! Tangent vectors are axis-angle vectors in R³ whose norm is the rotation
//! angle. The logarithm is computed through a unit quaternion extracted with
//! Shepperd's method, which stays accurate all the way up to angle π where
//! the usual trace/sine formula loses every significant digit.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{invalid, Error, Result};

/// Axis-angle element of so(3), in radians.
pub type TangentVector = Vector3<f64>;

/// Deviation below which a matrix is accepted verbatim as a rotation.
pub const EXACT_TOLERANCE: f64 = 1e-9;
/// Deviation up to which a matrix is re-projected onto SO(3) instead of rejected.
pub const REPAIR_TOLERANCE: f64 = 1e-6;

/// Below this angle exp/log switch to their Taylor expansions.
const SMALL_ANGLE: f64 = 1e-6;

/// A 3×3 rotation matrix. Orthonormal with unit determinant by construction.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Rotation").field(&self.0).finish()
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates `m` as a rotation.
    ///
    /// Matrices within [`EXACT_TOLERANCE`] of SO(3) are kept bit-for-bit,
    /// matrices within [`REPAIR_TOLERANCE`] are projected back onto the group,
    /// anything further away is rejected.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(invalid("rotation matrix has non-finite entries"));
        }
        let dev = orthonormality_deviation(&m);
        if dev <= EXACT_TOLERANCE {
            Ok(Self(m))
        } else if dev <= REPAIR_TOLERANCE {
            project_to_so3(&m)
        } else {
            Err(invalid(format!(
                "matrix deviates from SO(3) by {dev:.3e} (limit {REPAIR_TOLERANCE:e})"
            )))
        }
    }

    /// Row-major constructor, see [`Rotation::from_matrix`].
    pub fn from_row_slice(values: &[f64; 9]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_row_slice(values))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Entries in row-major order.
    pub fn to_row_array(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Rotation angle in [0, π].
    pub fn angle(&self) -> f64 {
        let (w, x, y, z) = quaternion_from_matrix(&self.0);
        2.0 * (x * x + y * y + z * z).sqrt().atan2(w)
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Uniformly distributed rotation (Haar measure) drawn from `rng`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q: [f64; 4] = [
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            ];
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return Self(matrix_from_quaternion(
                    q[0] / norm,
                    q[1] / norm,
                    q[2] / norm,
                    q[3] / norm,
                ));
            }
        }
    }

    /// `self · exp(n)` with `n` isotropic Gaussian, `sigma` radians per axis.
    pub fn perturbed<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("perturbation sigma must be >= 0, got {sigma}")));
        }
        if sigma == 0.0 {
            return Ok(*self);
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
        let n = Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
        Ok(*self * exp_unchecked(&n))
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// max(‖mᵀm − I‖_F, |det m − 1|)
pub fn orthonormality_deviation(m: &Matrix3<f64>) -> f64 {
    let gram = (m.transpose() * m - Matrix3::identity()).norm();
    gram.max((m.determinant() - 1.0).abs())
}

/// Rodrigues' formula. `exp_map(0)` is exactly the identity.
pub fn exp_map(v: &TangentVector) -> Result<Rotation> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(invalid("tangent vector has non-finite components"));
    }
    Ok(exp_unchecked(v))
}

pub(crate) fn exp_unchecked(v: &TangentVector) -> Rotation {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let half = 0.5 * theta;
        let s = half.sin() / half;
        (theta.sin() / theta, 0.5 * s * s)
    };
    let k = v.cross_matrix();
    Rotation(Matrix3::identity() + k * a + k * k * b)
}

/// Canonical logarithm with norm in [0, π]. At angle exactly π either of the
/// two antipodal axes may be returned.
pub fn log_map(r: &Rotation) -> TangentVector {
    let (w, x, y, z) = quaternion_from_matrix(&r.0);
    let n = (x * x + y * y + z * z).sqrt();
    let scale = if n < 0.5 * SMALL_ANGLE {
        // θ/n = 2·atan(n/w)/n ≈ (2/w)(1 − n²/(3w²))
        2.0 / w * (1.0 - n * n / (3.0 * w * w))
    } else {
        2.0 * n.atan2(w) / n
    };
    Vector3::new(x, y, z) * scale
}

/// Logarithm of an arbitrary matrix that must lie within [`REPAIR_TOLERANCE`] of SO(3).
pub fn log_map_matrix(m: &Matrix3<f64>) -> Result<TangentVector> {
    Ok(log_map(&Rotation::from_matrix(*m)?))
}

/// Geodesic distance ‖log(X Yᵀ)‖, in [0, π].
pub fn riemannian_distance(x: &Rotation, y: &Rotation) -> f64 {
    Rotation(x.0 * y.0.transpose()).angle()
}

/// Unit quaternion (w, x, y, z) with w ≥ 0, extracted by Shepperd's method.
fn quaternion_from_matrix(m: &Matrix3<f64>) -> (f64, f64, f64, f64) {
    let (m00, m11, m22) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);
    let trace = m00 + m11 + m22;
    let (w, x, y, z) = if trace >= m00 && trace >= m11 && trace >= m22 {
        let s = 2.0 * (1.0 + trace).sqrt();
        (
            0.25 * s,
            (m[(2, 1)] - m[(1, 2)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(1, 0)] - m[(0, 1)]) / s,
        )
    } else if m00 >= m11 && m00 >= m22 {
        let s = 2.0 * (1.0 + m00 - m11 - m22).sqrt();
        (
            (m[(2, 1)] - m[(1, 2)]) / s,
            0.25 * s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
        )
    } else if m11 >= m22 {
        let s = 2.0 * (1.0 + m11 - m00 - m22).sqrt();
        (
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            0.25 * s,
            (m[(1, 2)] + m[(2, 1)]) / s,
        )
    } else {
        let s = 2.0 * (1.0 + m22 - m00 - m11).sqrt();
        (
            (m[(1, 0)] - m[(0, 1)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            0.25 * s,
        )
    };
    let norm = (w * w + x * x + y * y + z * z).sqrt();
    let sign = if w < 0.0 { -1.0 } else { 1.0 } / norm;
    (w * sign, x * sign, y * sign, z * sign)
}

fn matrix_from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Matrix3<f64> {
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Nearest rotation in Frobenius norm: `U·diag(1, 1, ±1)·Vᵀ` from the SVD of `m`,
/// with the sign flip applied to the smallest singular direction.
pub fn project_to_so3(m: &Matrix3<f64>) -> Result<Rotation> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateInput("SVD did not converge".into())),
    };
    let sv = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let (largest, middle, smallest) = (sv[order[0]], sv[order[1]], order[2]);
    if largest <= 0.0 || middle <= 1e-12 * largest {
        return Err(Error::DegenerateInput(format!(
            "matrix has rank < 2 (singular values {:.3e}, {:.3e}, {:.3e})",
            sv[0], sv[1], sv[2]
        )));
    }
    let mut d = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        d[smallest] = -1.0;
    }
    Ok(Rotation(u * Matrix3::from_diagonal(&d) * v_t))
}

/// Uniform rotation from a seed.
pub fn random_rotation(seed: u64) -> Rotation {
    Rotation::random(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// `r · exp(n)`, n ~ N(0, sigma² I), seeded.
pub fn perturb(r: &Rotation, sigma: f64, seed: u64) -> Result<Rotation> {
    r.perturbed(sigma, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Roll/pitch/yaw in radians, composed as `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }
}

pub fn euler_to_rotation(e: &EulerAngles) -> Result<Rotation> {
    if !(e.roll.is_finite() && e.pitch.is_finite() && e.yaw.is_finite()) {
        return Err(invalid("Euler angles must be finite"));
    }
    Ok(Rotation::rot_z(e.yaw) * Rotation::rot_y(e.pitch) * Rotation::rot_x(e.roll))
}

/// Inverse of [`euler_to_rotation`], angles wrapped to [0, 2π).
///
/// Pitch is recovered from its sine, so the branch with cos(pitch) ≥ 0 is
/// returned. At gimbal lock the roll is set to zero and the remaining
/// rotation is attributed to yaw.
pub fn rotation_to_euler(r: &Rotation) -> EulerAngles {
    let m = &r.0;
    let sp = (-m[(2, 0)]).clamp(-1.0, 1.0);
    let pitch = sp.asin();
    let cp = (m[(2, 1)] * m[(2, 1)] + m[(2, 2)] * m[(2, 2)]).sqrt();
    let (roll, yaw) = if cp > 1e-12 {
        (m[(2, 1)].atan2(m[(2, 2)]), m[(1, 0)].atan2(m[(0, 0)]))
    } else {
        (0.0, (-m[(0, 1)]).atan2(m[(1, 1)]))
    };
    EulerAngles {
        roll: wrap_two_pi(roll),
        pitch: wrap_two_pi(pitch),
        yaw: wrap_two_pi(yaw),
    }
}

/// Wraps an angle into [0, 2π).
pub fn wrap_two_pi(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Discrete distribution over B angle bins covering [0, 2π).
#[derive(Debug, Clone, PartialEq)]
pub struct AngleDistribution {
    probs: Vec<f64>,
}

impl AngleDistribution {
    pub const DEFAULT_BINS: usize = 360;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(invalid(format!("need at least 2 bins, got {}", probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(invalid(format!("bin probability {p} is not a nonnegative number")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(invalid(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Self { probs })
    }

    pub fn one_hot(bins: usize, k: usize) -> Result<Self> {
        if k >= bins {
            return Err(invalid(format!("bin {k} out of range for {bins} bins")));
        }
        let mut probs = vec![0.0; bins];
        probs[k] = 1.0;
        Self::new(probs)
    }

    pub fn uniform(bins: usize) -> Result<Self> {
        Self::new(vec![1.0 / bins as f64; bins])
    }

    pub fn bin_count(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Left edge of bin `k`: 2πk/B.
    pub fn bin_center(&self, k: usize) -> f64 {
        TAU * k as f64 / self.probs.len() as f64
    }

    /// Linear expectation Σ p_k θ_k. Not a circular mean: mass split across
    /// the 0/2π seam averages to roughly π.
    pub fn expectation(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| p * self.bin_center(k))
            .sum()
    }
}

pub fn distribution_expectation(d: &AngleDistribution) -> f64 {
    d.expectation()
}

/// Degrees to radians.
pub fn deg(x: f64) -> f64 {
    x * PI / 180.0
}

/// Radians to degrees.
pub fn to_deg(x: f64) -> f64 {
    x * 180.0 / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::UnitQuaternion;
    use std::f64::consts::FRAC_PI_2;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_tangent(rng: &mut ChaCha8Rng, max_angle: f64) -> TangentVector {
        let axis = loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                break v / n;
            }
        };
        axis * rng.random_range(0.0..max_angle)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let r = exp_map(&Vector3::zeros()).unwrap();
        assert_eq!(*r.matrix(), Matrix3::identity());
    }

    #[test]
    fn exp_of_quarter_turn_about_z() {
        let r = exp_map(&Vector3::new(0.0, 0.0, FRAC_PI_2)).unwrap();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(*r.matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn exp_rejects_non_finite() {
        assert!(matches!(
            exp_map(&Vector3::new(f64::NAN, 0.0, 0.0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn log_of_identity_and_quarter_turn() {
        assert_eq!(log_map(&Rotation::identity()), Vector3::zeros());
        let v = log_map(&Rotation::rot_z(FRAC_PI_2));
        assert_abs_diff_eq!(v, Vector3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-15);
    }

    #[test]
    fn log_exp_roundtrip_seeded() {
        let mut rng = rng(7);
        for _ in 0..1000 {
            let v = random_tangent(&mut rng, PI - 1e-6);
            let back = log_map(&exp_map(&v).unwrap());
            assert!((back - v).norm() < 1e-9, "{v} -> {back}");
        }
    }

    #[test]
    fn log_near_pi_matches_quaternion_oracle() {
        let mut rng = rng(11);
        for _ in 0..200 {
            let axis = random_tangent(&mut rng, 1.0).normalize();
            let v = axis * (PI - 1e-4);
            let r = exp_map(&v).unwrap();
            let oracle = UnitQuaternion::from_matrix(r.matrix()).scaled_axis();
            assert!((log_map(&r) - oracle).norm() < 1e-7);
        }
    }

    #[test]
    fn log_at_exactly_pi_returns_either_axis() {
        let r = Rotation::rot_x(PI);
        let v = log_map(&r);
        assert_abs_diff_eq!(v.norm(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(v.x.abs(), PI, epsilon = 1e-12);
    }

    #[test]
    fn small_angle_branches_are_consistent() {
        for &a in &[1e-12, 1e-9, 4e-7, 6e-7, 1e-5] {
            let v = Vector3::new(a, -0.5 * a, 0.25 * a);
            let back = log_map(&exp_map(&v).unwrap());
            assert!((back - v).norm() <= 1e-15 + 1e-9 * v.norm());
        }
    }

    #[test]
    fn log_map_matrix_rejects_non_rotation() {
        let m = Matrix3::identity() * 1.01;
        assert!(matches!(log_map_matrix(&m), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn distance_equals_z_angle() {
        for &t in &[-3.0, -1.0, 0.0, 0.2, 2.5, PI] {
            let d = riemannian_distance(&Rotation::rot_z(t), &Rotation::identity());
            assert_abs_diff_eq!(d, f64::abs(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn distance_is_bi_invariant() {
        let mut rng = rng(3);
        for _ in 0..1000 {
            let (x, y, z) = (Rotation::random(&mut rng), Rotation::random(&mut rng), Rotation::random(&mut rng));
            let d = riemannian_distance(&x, &y);
            assert!((riemannian_distance(&(z * x), &(z * y)) - d).abs() < 1e-9);
            assert!((riemannian_distance(&(x * z), &(y * z)) - d).abs() < 1e-9);
            assert!((riemannian_distance(&y, &x) - d).abs() < 1e-12);
            assert!(riemannian_distance(&x, &z) <= d + riemannian_distance(&y, &z) + 1e-9);
        }
    }

    #[test]
    fn euler_identity_and_single_axes() {
        let r = euler_to_rotation(&EulerAngles::new(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(*r.matrix(), Matrix3::identity());
        let yaw = euler_to_rotation(&EulerAngles::new(0.0, 0.0, FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(*yaw.matrix(), *Rotation::rot_z(FRAC_PI_2).matrix(), epsilon = 1e-15);
        assert_eq!(rotation_to_euler(&Rotation::identity()), EulerAngles::new(0.0, 0.0, 0.0));
        let e = rotation_to_euler(&Rotation::rot_x(0.3));
        assert_abs_diff_eq!(e.roll, 0.3, epsilon = 1e-15);
        assert_eq!((e.pitch, e.yaw), (0.0, 0.0));
    }

    #[test]
    fn euler_roundtrip_away_from_gimbal_lock() {
        let mut rng = rng(5);
        for _ in 0..1000 {
            let pitch = rng.random_range(-FRAC_PI_2 + 1e-3..FRAC_PI_2 - 1e-3);
            let e = EulerAngles::new(rng.random_range(0.0..TAU), pitch, rng.random_range(0.0..TAU));
            let back = rotation_to_euler(&euler_to_rotation(&e).unwrap());
            let circ = |a: f64, b: f64| {
                let d = (a - b).rem_euclid(TAU);
                d.min(TAU - d)
            };
            assert!(circ(back.roll, e.roll) < 1e-9);
            assert!(circ(back.pitch, pitch) < 1e-9);
            assert!(circ(back.yaw, e.yaw) < 1e-9);
        }
    }

    #[test]
    fn euler_gimbal_lock_sets_roll_to_zero() {
        let e = EulerAngles::new(0.4, FRAC_PI_2, 1.0);
        let r = euler_to_rotation(&e).unwrap();
        let back = rotation_to_euler(&r);
        assert_eq!(back.roll, 0.0);
        let again = euler_to_rotation(&back).unwrap();
        assert!(riemannian_distance(&r, &again) < 1e-7);
    }

    #[test]
    fn expectation_of_simple_distributions() {
        let d = AngleDistribution::one_hot(360, 17).unwrap();
        assert_eq!(d.expectation(), TAU * 17.0 / 360.0);
        let mut probs = vec![0.0; 360];
        probs[40] = 0.5;
        probs[41] = 0.5;
        let d = AngleDistribution::new(probs).unwrap();
        assert_abs_diff_eq!(d.expectation(), TAU * 40.5 / 360.0, epsilon = 1e-15);
    }

    #[test]
    fn expectation_of_uniform_matches_direct_sum() {
        let d = AngleDistribution::uniform(360).unwrap();
        let direct: f64 = (0..360).map(|k| TAU * k as f64 / 360.0).sum::<f64>() / 360.0;
        assert_abs_diff_eq!(d.expectation(), direct, epsilon = 1e-12);
        // (B−1)/B · π
        assert_abs_diff_eq!(direct, PI * 359.0 / 360.0, epsilon = 1e-12);
    }

    #[test]
    fn distribution_validation() {
        assert!(AngleDistribution::new(vec![1.0]).is_err());
        assert!(AngleDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(AngleDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(AngleDistribution::new(vec![0.5, 0.5 + 1e-8]).is_ok());
    }

    #[test]
    fn perturb_zero_is_identity_op_and_deterministic() {
        let r = random_rotation(1);
        assert_eq!(perturb(&r, 0.0, 9).unwrap(), r);
        assert_eq!(perturb(&r, 0.1, 9).unwrap(), perturb(&r, 0.1, 9).unwrap());
        assert_eq!(random_rotation(4), random_rotation(4));
        assert!(matches!(perturb(&r, -0.1, 9), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn perturb_mean_angle_matches_monte_carlo() {
        // E‖n‖ for n ~ N(0, σ²I₃) estimated by direct sampling of n.
        let sigma = 0.05;
        let samples = 10_000;
        let mut oracle_rng = rng(100);
        let normal = Normal::new(0.0, sigma).unwrap();
        let oracle: f64 = (0..samples)
            .map(|_| {
                Vector3::new(
                    normal.sample(&mut oracle_rng),
                    normal.sample(&mut oracle_rng),
                    normal.sample(&mut oracle_rng),
                )
                .norm()
            })
            .sum::<f64>()
            / samples as f64;
        let base = random_rotation(2);
        let mut rng = rng(200);
        let mean: f64 = (0..samples)
            .map(|_| riemannian_distance(&base.perturbed(sigma, &mut rng).unwrap(), &base))
            .sum::<f64>()
            / samples as f64;
        assert!((mean - oracle).abs() < 0.05 * oracle, "{mean} vs {oracle}");
    }

    #[test]
    fn projection_is_idempotent_and_scale_invariant() {
        let r = random_rotation(8);
        let p = project_to_so3(r.matrix()).unwrap();
        assert_abs_diff_eq!(*p.matrix(), *r.matrix(), epsilon = 1e-14);
        let p = project_to_so3(&(r.matrix() * 1.7)).unwrap();
        assert_abs_diff_eq!(*p.matrix(), *r.matrix(), epsilon = 1e-14);
    }

    #[test]
    fn projection_rejects_rank_one() {
        let m = Vector3::new(1.0, 2.0, 3.0) * Vector3::new(0.5, -1.0, 2.0).transpose();
        assert!(matches!(project_to_so3(&m), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn projection_handles_rank_two_and_reflections() {
        let m = Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 0.0));
        let p = project_to_so3(&m).unwrap();
        assert_abs_diff_eq!(*p.matrix(), Matrix3::identity(), epsilon = 1e-12);
        let m = Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, -1.0));
        let p = project_to_so3(&m).unwrap();
        assert_abs_diff_eq!(*p.matrix(), Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn projection_matches_grid_search() {
        // Oracle: maximize tr(Rᵀ M) over a coarse grid, then refine locally
        // with shrinking random perturbations. Equivalent to min ‖R − M‖_F.
        let mut rng = rng(21);
        for case in 0..20 {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let score = |r: &Rotation| (r.matrix().transpose() * m).trace();
            let mut best = Rotation::identity();
            let steps = 24;
            for a in 0..steps {
                for b in 0..steps {
                    for c in 0..steps {
                        let v = Vector3::new(a as f64, b as f64, c as f64) / steps as f64 * 2.0 * PI
                            - Vector3::repeat(PI);
                        if v.norm() > PI {
                            continue;
                        }
                        let r = exp_unchecked(&v);
                        if score(&r) > score(&best) {
                            best = r;
                        }
                    }
                }
            }
            let mut step = 0.3;
            while step > 1e-6 {
                let mut improved = false;
                for axis in 0..3 {
                    for sign in [-1.0, 1.0] {
                        let mut v = Vector3::zeros();
                        v[axis] = sign * step;
                        let cand = best * exp_unchecked(&v);
                        if score(&cand) > score(&best) {
                            best = cand;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            let p = project_to_so3(&m).unwrap();
            let dist = riemannian_distance(&p, &best);
            assert!(dist < 1e-3, "case {case}: {dist}");
            assert!(score(&p) >= score(&best) - 1e-9);
        }
    }

    #[test]
    fn from_matrix_tolerances() {
        let r = random_rotation(3);
        assert_eq!(Rotation::from_matrix(*r.matrix()).unwrap(), r);
        let mut m = *r.matrix();
        m[(0, 0)] += 1e-7;
        let repaired = Rotation::from_matrix(m).unwrap();
        assert!(orthonormality_deviation(repaired.matrix()) < 1e-12);
        m[(0, 0)] += 1e-4;
        assert!(Rotation::from_matrix(m).is_err());
    }
}
