//! Exact SO(3)/SE(3) arithmetic.
//!
//! Rotations are stored as plain 3x3 matrices. Poses are vectorized as
//! `x(T) = col(vec(R), t)` with `vec` stacking columns, so that
//! `R v = (v^T ⊗ I3) vec(R)` holds exactly.

use nalgebra::{Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::GeometryError;

/// 12-vector `col(vec(R), t)`.
pub type PoseVector = SVector<f64, 12>;

const SMALL_ANGLE: f64 = 1e-8;
const NEAR_PI: f64 = 1e-3;

/// An element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix that is already orthonormal with unit determinant.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Wraps `m` after checking `m^T m = I` and `det m = 1` to `tol`.
    pub fn from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self, GeometryError> {
        let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if orth > tol || (det - 1.0).abs() > tol {
            return Err(GeometryError::NotARotation { orth, det });
        }
        Ok(Rotation(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(self.0 * other.0)
    }

    /// Column-major vectorization.
    pub fn vec(&self) -> SVector<f64, 9> {
        SVector::<f64, 9>::from_column_slice(self.0.as_slice())
    }

    pub fn exp(s: &Vector3<f64>) -> Self {
        exp_map(s)
    }

    pub fn log(&self) -> Vector3<f64> {
        log_map(self)
    }
}

impl std::ops::Mul<Vector3<f64>> for &Rotation {
    type Output = Vector3<f64>;
    fn mul(self, v: Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

/// A rigid transformation `[R t; 0 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(Rotation::identity(), Vector3::zeros())
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        apply(self, p)
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        compose(self, other)
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt.matrix() * self.translation))
    }

    pub fn to_vector(&self) -> PoseVector {
        vectorize_pose(self)
    }
}

/// Cross-product matrix: `hat(s) v = s × v`.
pub fn hat(s: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -s.z, s.y, s.z, 0.0, -s.x, -s.y, s.x, 0.0)
}

/// Inverse of [`hat`] applied to the skew part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues' formula.
pub fn exp_map(s: &Vector3<f64>) -> Rotation {
    let theta = s.norm();
    let k = hat(s);
    let k2 = k * k;
    let m = if theta < SMALL_ANGLE {
        Matrix3::identity() + k + 0.5 * k2
    } else {
        Matrix3::identity()
            + (theta.sin() / theta) * k
            + ((1.0 - theta.cos()) / (theta * theta)) * k2
    };
    Rotation(m)
}

/// Principal logarithm with `‖result‖ ∈ [0, π]`.
pub fn log_map(r: &Rotation) -> Vector3<f64> {
    let m = r.matrix();
    let axis_sin = vee(m);
    let cos = 0.5 * (m.trace() - 1.0);
    let sin = axis_sin.norm();
    let theta = sin.atan2(cos);
    if theta < SMALL_ANGLE {
        // R ≈ I + hat(s)
        return axis_sin;
    }
    if PI - theta > NEAR_PI {
        return axis_sin * (theta / sin);
    }
    // Near π the skew part vanishes; read the axis off the symmetric part
    // B = (R + R^T)/2 - cos(θ) I = (1 - cos θ) w w^T.
    let b = (0.5 * (m + m.transpose()) - Matrix3::identity() * cos) / (1.0 - cos);
    let i = (0..3)
        .max_by(|&a, &c| b[(a, a)].total_cmp(&b[(c, c)]))
        .unwrap_or(0);
    let wi = b[(i, i)].max(0.0).sqrt();
    let mut w = Vector3::new(b[(0, i)], b[(1, i)], b[(2, i)]) / wi;
    w.normalize_mut();
    if w.dot(&axis_sin) < 0.0 {
        w = -w;
    }
    w * theta
}

/// Geodesic angle between two rotations, in `[0, π]`.
pub fn geodesic_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    let c = 0.5 * ((r1.matrix() * r2.matrix().transpose()).trace() - 1.0);
    c.clamp(-1.0, 1.0).acos()
}

pub fn apply(t: &Pose, p: &Vector3<f64>) -> Vector3<f64> {
    t.rotation.matrix() * p + t.translation
}

/// `T1 T2`: `R3 = R1 R2`, `t3 = R1 t2 + t1`.
pub fn compose(t1: &Pose, t2: &Pose) -> Pose {
    Pose::new(
        t1.rotation.compose(&t2.rotation),
        t1.rotation.matrix() * t2.translation + t1.translation,
    )
}

pub fn vectorize_pose(t: &Pose) -> PoseVector {
    let mut x = PoseVector::zeros();
    x.fixed_rows_mut::<9>(0).copy_from(&t.rotation.vec());
    x.fixed_rows_mut::<3>(9).copy_from(&t.translation);
    x
}

/// Inverse of [`vectorize_pose`]; the rotation block is taken as is.
pub fn devectorize_pose(x: &PoseVector) -> Pose {
    let r = Matrix3::from_column_slice(&x.as_slice()[..9]);
    Pose::new(
        Rotation(r),
        Vector3::new(x[9], x[10], x[11]),
    )
}

/// Matrix with `vec(M) = r` (column-major).
pub fn devec3(r: &[f64]) -> Matrix3<f64> {
    Matrix3::from_column_slice(&r[..9])
}

/// Nearest rotation in Frobenius norm.
pub fn project_so3(m: &Matrix3<f64>) -> Result<Rotation, GeometryError> {
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(GeometryError::DegenerateProjection),
    };
    let s = svd.singular_values;
    let smax = s.max();
    let (imin, smin) = s.argmin();
    if !(smax > 0.0) || smin <= 1e-12 * smax {
        return Err(GeometryError::DegenerateProjection);
    }
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(imin, imin)] = -1.0;
    }
    Ok(Rotation(u * d * vt))
}
