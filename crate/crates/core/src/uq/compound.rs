use nalgebra::{DMatrix, DVector, Vector3};

use super::{DecomposedPoseSet, PosePolytope, RotationBallSet};
use crate::error::{PolytopeError, UqError};
use crate::liegroup::{devec3, project_so3, Rotation};
use crate::polytope::{
    enclose_ellipsoid, facet_enum, minkowski_sum_points, project, vertex_enum, Ellipsoid, Enclosure, HPolytope,
    VPolytope,
};
use crate::sdp::{certified_lower_bound, certified_upper_bound, solve, CompoundRelaxation, RotballRelaxation, SdpStatus};

/// Relative inflation of the rotation-ball trace bound.
pub const ROTBALL_INFLATION: f64 = 1e-9;

/// Template enclosure of `{x(T₁T₂) : T₁ ∈ p1, T₂ ∈ p2}`, one compound SDP per row.
pub fn compound_direct(
    p1: &PosePolytope,
    p2: &PosePolytope,
    template: &DMatrix<f64>,
) -> Result<Enclosure<PosePolytope>, UqError> {
    if template.ncols() != 12 {
        return Err(PolytopeError::DimensionMismatch { expected: 12, found: template.ncols() }.into());
    }
    if p1.is_empty()? || p2.is_empty()? {
        return Ok(Enclosure::Empty);
    }
    let rel = CompoundRelaxation::new(p1.h(), p1.d(), p2.h(), p2.d())?;
    let mut offsets = DVector::zeros(template.nrows());
    for m in 0..template.nrows() {
        let a = template.row(m).transpose();
        let r = solve(&rel.problem(&a)?);
        if r.status == SdpStatus::Infeasible {
            return Ok(Enclosure::Empty);
        }
        offsets[m] = certified_upper_bound(&r, None).map_err(|source| UqError::Facet { facet: m, source })?;
    }
    Ok(Enclosure::Set(PosePolytope::new(template.clone(), offsets)?))
}

/// Splits a pose set into a translation polytope and a rotation ball.
pub fn decompose_pose_set(p: &PosePolytope) -> Result<Enclosure<DecomposedPoseSet>, UqError> {
    if p.is_empty()? {
        return Ok(Enclosure::Empty);
    }
    let translation = project(p.polytope(), &[9, 10, 11])?;
    let rot = project(p.polytope(), &(0..9).collect::<Vec<_>>())?;
    let Some(hull) = rot.interval_hull()? else { return Ok(Enclosure::Empty) };
    let r_bar: Vec<f64> = hull.iter().map(|(l, u)| 0.5 * (l + u)).collect();
    let center = project_so3(&devec3(&r_bar)).unwrap_or_else(|_| Rotation::identity());
    let c: Vec<f64> = center.vec().iter().copied().collect();
    let rel = RotballRelaxation::new(rot.a(), rot.b())?;
    let r = solve(&rel.problem(&c)?);
    if r.status == SdpStatus::Infeasible {
        return Ok(Enclosure::Empty);
    }
    let c_star = certified_lower_bound(&r, Some(ROTBALL_INFLATION * r.dual_bound.abs().max(1.0)))?;
    let theta = ((c_star - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    Ok(Enclosure::Set(DecomposedPoseSet { rotation: RotationBallSet { center, radius: theta }, translation }))
}

/// `max ⟨E a, v⟩` over rotations `E` within angle `theta` of the identity.
pub fn inner_max_rotated_dot(a: &Vector3<f64>, v: &Vector3<f64>, theta: f64) -> f64 {
    let nv = v.norm();
    if nv == 0.0 {
        return 0.0;
    }
    let angle = (a.dot(v) / (a.norm() * nv)).clamp(-1.0, 1.0).acos();
    if angle <= theta {
        nv
    } else {
        nv * (angle - theta).cos()
    }
}

/// `(R̄₁R̄₂, θ₁′+θ₂′)` and the translation set `R̄₁ P(A, b) ⊕ D₁.translation`.
pub fn compound_indirect(
    d1: &DecomposedPoseSet,
    d2: &DecomposedPoseSet,
    template: &DMatrix<f64>,
) -> Result<DecomposedPoseSet, UqError> {
    if template.ncols() != 3 {
        return Err(PolytopeError::DimensionMismatch { expected: 3, found: template.ncols() }.into());
    }
    let center = d1.rotation.center.compose(&d2.rotation.center);
    let radius = (d1.rotation.radius + d2.rotation.radius).min(std::f64::consts::PI);
    let theta1 = d1.rotation.radius;

    let v2 = vertex_enum(&d2.translation)?;
    let b = DVector::from_fn(template.nrows(), |m, _| {
        let a = Vector3::new(template[(m, 0)], template[(m, 1)], template[(m, 2)]);
        v2.vertices()
            .iter()
            .map(|v| inner_max_rotated_dot(&a, &Vector3::new(v[0], v[1], v[2]), theta1))
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let rotated_normals = template * d1.rotation.center.transpose().matrix();
    let moved = HPolytope::new(DMatrix::from_fn(template.nrows(), 3, |i, j| rotated_normals[(i, j)]), b)?;
    let v1 = vertex_enum(&d1.translation)?;
    let vm = vertex_enum(&moved)?;
    let pts = minkowski_sum_points(&vm, &v1);
    let translation = match facet_enum(&VPolytope::new(pts.clone())?) {
        Ok(h) => h,
        Err(PolytopeError::DegenerateHull) => support_enclosure(&pts, template)?,
        Err(e) => return Err(e.into()),
    };
    Ok(DecomposedPoseSet { rotation: RotationBallSet { center, radius }, translation })
}

fn support_enclosure(pts: &[DVector<f64>], template: &DMatrix<f64>) -> Result<HPolytope, UqError> {
    let b = DVector::from_fn(template.nrows(), |m, _| {
        let a = template.row(m).transpose();
        pts.iter().map(|p| a.dot(p)).fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(HPolytope::new(template.clone(), b)?)
}

/// Template enclosure of `{vec(R) : dis(R, R̄) ≤ θ′}` through the Frobenius
/// ball of radius `2√2 sin(θ′/2)`.
pub fn rotball_to_polytope(ball: &RotationBallSet, template: &DMatrix<f64>) -> Result<HPolytope, UqError> {
    if template.ncols() != 9 {
        return Err(PolytopeError::DimensionMismatch { expected: 9, found: template.ncols() }.into());
    }
    let theta = ball.radius.clamp(0.0, std::f64::consts::PI);
    let e = Ellipsoid {
        center: DVector::from_column_slice(ball.center.vec().as_slice()),
        shape: DMatrix::identity(9, 9),
        scale: 2.0 * std::f64::consts::SQRT_2 * (theta / 2.0).sin(),
    };
    Ok(enclose_ellipsoid(&e, template)?)
}
