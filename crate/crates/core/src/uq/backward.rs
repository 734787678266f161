use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PosePolytope;
use crate::error::{PolytopeError, UqError};
use crate::polytope::{chebyshev_ball, diameter, vertex_enum, Enclosure, HPolytope};

/// How the local set is shrunk to a point before the linear preimage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackwardMode {
    /// Enclosing-ball center, offsets widened by the ball radius.
    Chebyshev,
    /// First vertex, offsets widened by the diameter.
    Diameter,
}

/// Poses `T` for which some `p` in `local` maps into `global`.
///
/// Rows `a_mᵀ(Rs + t) ≤ b_m + r` are stored unit-normalized, followed by
/// `|r_ij| ≤ 1` on the rotation entries.
pub fn backward_uq(local: &HPolytope, global: &HPolytope, mode: BackwardMode) -> Result<Enclosure<PosePolytope>, UqError> {
    if local.dim() != 3 || global.dim() != 3 {
        return Err(PolytopeError::DimensionMismatch { expected: 3, found: local.dim().max(global.dim()) }.into());
    }
    if local.is_empty()? || global.is_empty()? {
        return Ok(Enclosure::Empty);
    }
    let verts = vertex_enum(local)?;
    let (s, r) = match mode {
        BackwardMode::Chebyshev => {
            let ball = chebyshev_ball(&verts);
            (ball.center, ball.radius)
        }
        BackwardMode::Diameter => (verts.vertices()[0].clone(), diameter(&verts)),
    };
    let (a2, b2) = (global.a(), global.b());
    let m = a2.nrows();
    let norm = (1.0 + s.norm_squared()).sqrt();
    let mut h = DMatrix::zeros(m + 18, 12);
    let mut d = DVector::zeros(m + 18);
    for i in 0..m {
        for k in 0..3 {
            for j in 0..3 {
                h[(i, 3 * k + j)] = s[k] * a2[(i, j)] / norm;
            }
            h[(i, 9 + k)] = a2[(i, k)] / norm;
        }
        d[i] = (b2[i] + r) / norm;
    }
    for k in 0..9 {
        h[(m + 2 * k, k)] = 1.0;
        h[(m + 2 * k + 1, k)] = -1.0;
        d[m + 2 * k] = 1.0;
        d[m + 2 * k + 1] = 1.0;
    }
    Ok(Enclosure::Set(PosePolytope::from_polytope(HPolytope::from_normalized(h, d))?))
}

/// Conjunction of the per-pair sets with redundant rows removed.
pub fn backward_uq_multi(pairs: &[(HPolytope, HPolytope)], mode: BackwardMode) -> Result<Enclosure<PosePolytope>, UqError> {
    if pairs.is_empty() {
        return Err(UqError::Invalid("no correspondences".into()));
    }
    if let [(local, global)] = pairs {
        return backward_uq(local, global, mode);
    }
    let mut stacked: Option<HPolytope> = None;
    for (local, global) in pairs {
        let Enclosure::Set(p) = backward_uq(local, global, mode)? else { return Ok(Enclosure::Empty) };
        stacked = Some(match stacked {
            None => p.polytope().clone(),
            Some(acc) => acc.stack(p.polytope())?,
        });
    }
    let all = stacked.expect("at least one pair");
    if all.is_empty()? {
        return Ok(Enclosure::Empty);
    }
    Ok(Enclosure::Set(PosePolytope::from_polytope(all.remove_redundant()?)?))
}
