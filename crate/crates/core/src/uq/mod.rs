//! Guaranteed forward, backward and compound uncertainty primitives.

mod backward;
mod compound;
mod forward;
mod sample;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{PolytopeError, UqError};
use crate::liegroup::{Pose, Rotation};
use crate::polytope::HPolytope;

pub use backward::{backward_uq, backward_uq_multi, BackwardMode};
pub use compound::{
    compound_direct, compound_indirect, decompose_pose_set, inner_max_rotated_dot, rotball_to_polytope,
    ROTBALL_INFLATION,
};
pub use forward::forward_uq;
pub use sample::{sample_pose_set, PoseSampling, MAX_PROPOSALS, MIN_ACCEPTANCE};

/// `{T ∈ SE(3) : H x(T) ≤ d}` with `x(T) = col(vec(R), t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseJson", into = "PoseJson")]
pub struct PosePolytope {
    set: HPolytope,
}

#[derive(Serialize, Deserialize)]
struct PoseJson {
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    d: Vec<f64>,
}

impl TryFrom<PoseJson> for PosePolytope {
    type Error = UqError;
    fn try_from(j: PoseJson) -> Result<Self, UqError> {
        if j.h.iter().any(|r| r.len() != 12) {
            return Err(PolytopeError::DimensionMismatch { expected: 12, found: j.h.first().map_or(0, Vec::len) }.into());
        }
        if j.h.len() != j.d.len() {
            return Err(PolytopeError::DimensionMismatch { expected: j.h.len(), found: j.d.len() }.into());
        }
        let h = DMatrix::from_fn(j.h.len(), 12, |i, k| j.h[i][k]);
        PosePolytope::new(h, DVector::from_vec(j.d))
    }
}

impl From<PosePolytope> for PoseJson {
    fn from(p: PosePolytope) -> Self {
        PoseJson {
            h: p.set.a().row_iter().map(|r| r.iter().copied().collect()).collect(),
            d: p.set.b().iter().copied().collect(),
        }
    }
}

impl PosePolytope {
    pub fn new(h: DMatrix<f64>, d: DVector<f64>) -> Result<Self, UqError> {
        Self::from_polytope(HPolytope::new(h, d)?)
    }

    pub fn from_polytope(set: HPolytope) -> Result<Self, UqError> {
        if set.dim() != 12 {
            return Err(PolytopeError::DimensionMismatch { expected: 12, found: set.dim() }.into());
        }
        Ok(PosePolytope { set })
    }

    /// `H = [1, −1]ᵀ ⊗ I₁₂`, `d = [1, −1]ᵀ ⊗ x(T)`: the single pose `T`.
    pub fn point(t: &Pose) -> Self {
        let x = t.to_vector();
        let mut h = DMatrix::zeros(24, 12);
        let mut d = DVector::zeros(24);
        for k in 0..12 {
            h[(k, k)] = 1.0;
            d[k] = x[k];
            h[(12 + k, k)] = -1.0;
            d[12 + k] = -x[k];
        }
        PosePolytope { set: HPolytope::from_normalized(h, d) }
    }

    /// Box of half-widths `rot` on the rotation entries and `trans` on the
    /// translation around `x(T)`.
    pub fn around(t: &Pose, rot: f64, trans: f64) -> Self {
        let x = t.to_vector();
        let w = DVector::from_fn(12, |k, _| if k < 9 { rot } else { trans });
        let c = DVector::from_column_slice(x.as_slice());
        PosePolytope { set: HPolytope::from_box(&(&c - &w), &(&c + &w)) }
    }

    pub fn h(&self) -> &DMatrix<f64> {
        self.set.a()
    }

    pub fn d(&self) -> &DVector<f64> {
        self.set.b()
    }

    pub fn polytope(&self) -> &HPolytope {
        &self.set
    }

    pub fn n_rows(&self) -> usize {
        self.set.n_rows()
    }

    pub fn contains_pose(&self, t: &Pose, tol: f64) -> bool {
        self.set.contains(&DVector::from_column_slice(t.to_vector().as_slice()), tol)
    }

    pub fn is_empty(&self) -> Result<bool, UqError> {
        Ok(self.set.is_empty()?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite polytope serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, UqError> {
        serde_json::from_str(s).map_err(|e| UqError::Invalid(e.to_string()))
    }
}

/// `R̄ · {Exp(θw) : w ∈ S², θ ≤ radius}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationBallSet {
    pub center: Rotation,
    pub radius: f64,
}

impl RotationBallSet {
    pub fn contains(&self, r: &Rotation, tol: f64) -> bool {
        crate::liegroup::geodesic_distance(r, &self.center) <= self.radius + tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DecomposedJson", into = "DecomposedJson")]
pub struct DecomposedPoseSet {
    pub rotation: RotationBallSet,
    pub translation: HPolytope,
}

#[derive(Serialize, Deserialize)]
struct DecomposedJson {
    #[serde(rename = "R_bar")]
    r_bar: [[f64; 3]; 3],
    theta: f64,
    #[serde(rename = "At")]
    at: Vec<Vec<f64>>,
    bt: Vec<f64>,
}

impl TryFrom<DecomposedJson> for DecomposedPoseSet {
    type Error = UqError;
    fn try_from(j: DecomposedJson) -> Result<Self, UqError> {
        let m = Matrix3::from_fn(|i, k| j.r_bar[i][k]);
        let center = Rotation::from_matrix(m, 1e-6)?;
        if !(0.0..=std::f64::consts::PI).contains(&j.theta) {
            return Err(UqError::Invalid(format!("theta {} outside [0, pi]", j.theta)));
        }
        if j.at.iter().any(|r| r.len() != 3) || j.at.len() != j.bt.len() {
            return Err(PolytopeError::DimensionMismatch { expected: 3, found: j.at.first().map_or(0, Vec::len) }.into());
        }
        let a = DMatrix::from_fn(j.at.len(), 3, |i, k| j.at[i][k]);
        Ok(DecomposedPoseSet {
            rotation: RotationBallSet { center, radius: j.theta },
            translation: HPolytope::new(a, DVector::from_vec(j.bt))?,
        })
    }
}

impl From<DecomposedPoseSet> for DecomposedJson {
    fn from(s: DecomposedPoseSet) -> Self {
        let m = s.rotation.center.matrix();
        DecomposedJson {
            r_bar: std::array::from_fn(|i| std::array::from_fn(|k| m[(i, k)])),
            theta: s.rotation.radius,
            at: s.translation.a().row_iter().map(|r| r.iter().copied().collect()).collect(),
            bt: s.translation.b().iter().copied().collect(),
        }
    }
}

impl DecomposedPoseSet {
    pub fn contains_pose(&self, t: &Pose, tol: f64) -> bool {
        let p: Vector3<f64> = t.translation;
        self.rotation.contains(&t.rotation, tol) && self.translation.contains(&DVector::from_column_slice(p.as_slice()), tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, UqError> {
        serde_json::from_str(s).map_err(|e| UqError::Invalid(e.to_string()))
    }
}

