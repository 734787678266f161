use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DecomposedPoseSet, PosePolytope};
use crate::error::{PolytopeError, UqError};
use crate::liegroup::{devec3, exp_map, project_so3, Pose, Rotation};
use crate::polytope::sample_uniform;

pub const MAX_PROPOSALS: usize = 1_000_000;
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Seeded pose sampling inside a set.
pub trait PoseSampling {
    fn sample_poses(&self, n: usize, seed: u64) -> Result<Vec<Pose>, UqError>;
}

pub fn sample_pose_set<S: PoseSampling + ?Sized>(set: &S, n: usize, seed: u64) -> Result<Vec<Pose>, UqError> {
    set.sample_poses(n, seed)
}

fn unit_sphere(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let w = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let n = w.norm();
        if n > 1e-12 {
            return w / n;
        }
    }
}

fn pinned(l: f64, u: f64) -> bool {
    u - l <= 1e-12 * l.abs().max(u.abs()).max(1.0)
}

/// Uniform draw in `[l, u]`, or the bound itself when the interval is a point.
fn coordinate(rng: &mut impl Rng, l: f64, u: f64) -> f64 {
    if pinned(l, u) { u } else { rng.random_range(l..=u) }
}

impl PoseSampling for PosePolytope {
    /// Rejection sampling: `R = R_c Exp(θw)` with `θ` uniform up to the
    /// angle that covers the rotation interval hull, `t` uniform in the
    /// translation interval hull; accepted iff every row holds exactly.
    fn sample_poses(&self, n: usize, seed: u64) -> Result<Vec<Pose>, UqError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hull = self.polytope().interval_hull()?.ok_or(PolytopeError::EmptySet)?;
        let mid: Vec<f64> = hull[..9].iter().map(|(l, u)| 0.5 * (l + u)).collect();
        let rot_pinned = hull[..9].iter().all(|&(l, u)| pinned(l, u));
        let (center, theta_max) = if rot_pinned {
            let r: Vec<f64> = hull[..9].iter().map(|&(_, u)| u).collect();
            (Rotation::from_matrix_unchecked(devec3(&r)), 0.0)
        } else {
            let c = project_so3(&devec3(&mid)).unwrap_or_else(|_| Rotation::identity());
            let off: f64 = c.vec().iter().zip(&mid).map(|(x, m)| (x - m).powi(2)).sum::<f64>().sqrt();
            let half: f64 = hull[..9].iter().map(|(l, u)| (0.5 * (u - l)).powi(2)).sum::<f64>().sqrt();
            let reach = (off + half) / (2.0 * std::f64::consts::SQRT_2);
            (c, 2.0 * reach.min(1.0).asin())
        };
        let mut out = Vec::with_capacity(n);
        let mut proposals = 0usize;
        while out.len() < n {
            proposals += 1;
            let rotation = if theta_max > 0.0 {
                let theta = rng.random_range(0.0..=theta_max);
                center.compose(&exp_map(&(unit_sphere(&mut rng) * theta)))
            } else {
                center
            };
            let t = Vector3::from_fn(|k, _| coordinate(&mut rng, hull[9 + k].0, hull[9 + k].1));
            let pose = Pose::new(rotation, t);
            if self.contains_pose(&pose, 0.0) {
                out.push(pose);
            }
            if proposals >= MAX_PROPOSALS && (out.len() as f64) < MIN_ACCEPTANCE * proposals as f64 {
                return Err(UqError::TooThin);
            }
        }
        Ok(out)
    }
}

impl PoseSampling for DecomposedPoseSet {
    /// `R = R̄ Exp(θw)` with `θ ≤ θ′`, `t` uniform in the translation polytope.
    fn sample_poses(&self, n: usize, seed: u64) -> Result<Vec<Pose>, UqError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts = sample_uniform(&self.translation, n, &mut rng)?;
        let theta_max = self.rotation.radius;
        Ok(ts
            .into_iter()
            .map(|t: DVector<f64>| {
                let theta = if theta_max > 0.0 { rng.random_range(0.0..=theta_max) } else { 0.0 };
                let r = self.rotation.center.compose(&exp_map(&(unit_sphere(&mut rng) * theta)));
                Pose::new(r, Vector3::new(t[0], t[1], t[2]))
            })
            .collect())
    }
}
