//! Rotation-group utilities: exponential and logarithm maps, the geodesic
//! metric, and roll/pitch/yaw conversion.
//!
//! All Euler angles use the intrinsic z-y-x convention, `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
//! The same convention is used by the filter residuals and the trajectory readers.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Tolerance applied by [`RotationMatrix::from_matrix`] when validating input.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// Below this angle the Rodrigues coefficients use their Taylor expansions.
const SMALL_ANGLE: f64 = 1e-7;

/// Gimbal-lock band around |pitch| = π/2.
const GIMBAL_TOL: f64 = 1e-9;

/// Rotation vector (axis times angle, radians). Canonical values have norm ≤ π.
pub type AxisAngle = Vector3<f64>;

/// A proper rotation matrix in SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and determinant before wrapping `m`.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation("non-finite entry".into()));
        }
        let gram = m.transpose() * m - Matrix3::identity();
        let worst = gram.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if worst > ORTHONORMAL_TOL {
            return Err(Error::InvalidRotation(format!(
                "RᵀR deviates from identity by {worst:.3e}"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidRotation(format!("determinant {det:.6}")));
        }
        Ok(Self(m))
    }

    /// Wraps `m` without checking. Callers must guarantee `m ∈ SO(3)`.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Nearest rotation to an arbitrary 3×3 matrix (polar decomposition via SVD).
    pub fn project(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let d = (u * v_t).determinant().signum();
        let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
        Self(u * fix * v_t)
    }

    pub fn rx(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn ry(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rz(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Column `i` of the matrix: the body axis `i` expressed in the world frame.
    pub fn column(&self, i: usize) -> Vector3<f64> {
        self.0.column(i).into_owned()
    }

    /// Re-orthonormalizes accumulated floating-point drift.
    pub fn renormalized(&self) -> Self {
        Self::project(&self.0)
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<&RotationMatrix> for &RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for RotationMatrix {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerRpy {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerRpy {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Skew-symmetric (cross-product) matrix of `v`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

/// Inverse of [`hat`] applied to the skew part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// Wraps an angle into (−π, π].
pub fn wrap_pi(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Rodrigues formula.
pub fn exp_so3(v: &AxisAngle) -> RotationMatrix {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat(v);
    RotationMatrix(Matrix3::identity() + k * a + k * k * b)
}

/// Canonical rotation vector of `r` (norm ≤ π).
pub fn log_so3(r: &RotationMatrix) -> AxisAngle {
    let m = &r.0;
    let w = vee(m);
    let s = w.norm();
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = s.atan2(c);

    if theta < SMALL_ANGLE {
        return w * (1.0 + theta * theta / 6.0);
    }
    if c > -0.9 {
        return w * (theta / s);
    }

    // Near π: (R + Rᵀ)/2 − cI = (1 − c)·kkᵀ; take the dominant column.
    let sym = (m + m.transpose()) * 0.5 - Matrix3::identity() * c;
    let kk = sym / (1.0 - c);
    let i = (0..3)
        .max_by(|&a, &b| kk[(a, a)].total_cmp(&kk[(b, b)]))
        .unwrap_or(0);
    let mut axis = kk.column(i).into_owned() / kk[(i, i)].sqrt();
    axis.normalize_mut();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Rotation angle of `r` in [0, π].
pub fn rotation_angle(r: &RotationMatrix) -> f64 {
    log_so3(r).norm()
}

/// `‖log(R1ᵀR2)‖_F`, i.e. √2 times the relative rotation angle.
pub fn geodesic_distance(r1: &RotationMatrix, r2: &RotationMatrix) -> f64 {
    let rel = r1.transpose() * *r2;
    std::f64::consts::SQRT_2 * log_so3(&rel).norm()
}

/// Converts to roll/pitch/yaw. The flag is set at gimbal lock, where yaw is
/// pinned to zero and the whole z rotation is folded into roll.
pub fn so3_to_rpy(r: &RotationMatrix) -> (EulerRpy, bool) {
    let m = &r.0;
    let cp = m[(0, 0)].hypot(m[(1, 0)]);
    let pitch = (-m[(2, 0)]).atan2(cp);
    if (FRAC_PI_2 - pitch.abs()) <= GIMBAL_TOL || cp <= GIMBAL_TOL {
        let roll = if pitch > 0.0 {
            m[(0, 1)].atan2(m[(1, 1)])
        } else {
            (-m[(0, 1)]).atan2(m[(1, 1)])
        };
        return (EulerRpy::new(canonical(roll), pitch, 0.0), true);
    }
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    (EulerRpy::new(canonical(roll), pitch, canonical(yaw)), false)
}

/// `Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn rpy_to_so3(e: &EulerRpy) -> RotationMatrix {
    RotationMatrix::rz(e.yaw) * RotationMatrix::ry(e.pitch) * RotationMatrix::rx(e.roll)
}

// atan2 may return exactly -π; the canonical interval is (-π, π].
fn canonical(a: f64) -> f64 {
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}
