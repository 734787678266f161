use nalgebra::{DMatrix, DVector, Vector3};

use super::PosePolytope;
use crate::error::{PolytopeError, UqError};
use crate::lp;
use crate::polytope::{vertex_enum, Enclosure, HPolytope};
use crate::sdp::{certified_upper_bound, solve, ForwardRelaxation, SdpError, SdpStatus};

/// Template enclosure of `{Rp + t : T ∈ pose_set, p ∈ point_set}`.
///
/// Each offset is the largest certified SDP bound over the vertices of
/// `point_set`. Vertices whose LP bound cannot beat the running maximum are
/// skipped.
pub fn forward_uq(
    point_set: &HPolytope,
    pose_set: &PosePolytope,
    template: &DMatrix<f64>,
) -> Result<Enclosure<HPolytope>, UqError> {
    if point_set.dim() != 3 || template.ncols() != 3 {
        return Err(PolytopeError::DimensionMismatch { expected: 3, found: template.ncols() }.into());
    }
    if point_set.is_empty()? || pose_set.is_empty()? {
        return Ok(Enclosure::Empty);
    }
    let verts: Vec<Vector3<f64>> = vertex_enum(point_set)?
        .vertices()
        .iter()
        .map(|v| Vector3::new(v[0], v[1], v[2]))
        .collect();
    let rel = match ForwardRelaxation::new(pose_set.h(), pose_set.d()) {
        Ok(r) => r,
        Err(SdpError::Bounds(_)) if pose_set.is_empty()? => return Ok(Enclosure::Empty),
        Err(e) => return Err(e.into()),
    };
    let (h, d) = (pose_set.h(), pose_set.d());
    let mut offsets = DVector::zeros(template.nrows());
    for m in 0..template.nrows() {
        let a = Vector3::new(template[(m, 0)], template[(m, 1)], template[(m, 2)]);
        let mut ranked: Vec<(f64, &Vector3<f64>)> = Vec::with_capacity(verts.len());
        for v in &verts {
            let c = DVector::from_fn(12, |k, _| if k < 9 { v[k / 3] * a[k % 3] } else { a[k - 9] });
            let ub = lp::support(h, d, &c)?.ok_or(PolytopeError::EmptySet)?;
            ranked.push((ub, v));
        }
        ranked.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut best = f64::NEG_INFINITY;
        for (ub, v) in ranked {
            if ub + 1e-9 * ub.abs().max(1.0) <= best {
                break;
            }
            let r = solve(&rel.problem(v, &a));
            if r.status == SdpStatus::Infeasible {
                return Ok(Enclosure::Empty);
            }
            let bound = certified_upper_bound(&r, None).map_err(|source| UqError::Facet { facet: m, source })?;
            best = best.max(bound);
        }
        offsets[m] = best;
    }
    Ok(Enclosure::Set(HPolytope::new(template.clone(), offsets)?))
}
