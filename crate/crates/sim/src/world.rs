use std::collections::BTreeSet;

use nalgebra::{DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use setslam_core::liegroup::{Pose, Rotation};
use setslam_core::polytope::HPolytope;
use setslam_core::slam::{Frame, LoopClosure, LoopMatch, Observation};

use crate::SimError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleConfig {
    pub radius: f64,
    pub n_frames: usize,
    /// Yaw of the optical axis from the direction of travel toward the
    /// circle center, degrees.
    pub inward_deg: f64,
}

impl Default for CircleConfig {
    fn default() -> Self {
        CircleConfig { radius: 5.0, n_frames: 20, inward_deg: 90.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Side of the landmark cube, centered at the origin.
    pub workspace: f64,
    pub n_landmarks: usize,
    pub trajectory: CircleConfig,
    pub fov_h: f64,
    pub fov_v: f64,
    pub depth_range: [f64; 2],
    /// Box half-width per meter of landmark distance.
    pub noise: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            workspace: 50.0,
            n_landmarks: 40_000,
            trajectory: CircleConfig::default(),
            fov_h: 60.0,
            fov_v: 60.0,
            depth_range: [0.5, 5.0],
            noise: 0.02,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.depth_range[0] > 0.0 && self.depth_range[1] > self.depth_range[0]) {
            return bad("depth_range must satisfy 0 < min < max");
        }
        if !(self.fov_h > 0.0 && self.fov_h < 180.0 && self.fov_v > 0.0 && self.fov_v < 180.0) {
            return bad("fov must lie in (0, 180) degrees");
        }
        if !(self.workspace > 0.0) || !(self.noise >= 0.0) || !(self.trajectory.radius > 0.0) {
            return bad("workspace, radius and noise must be positive");
        }
        if self.trajectory.n_frames == 0 {
            return bad("trajectory needs at least one frame");
        }
        if 2.0 * self.trajectory.radius >= self.workspace {
            return bad("trajectory does not fit in the workspace");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub landmarks: Vec<Vector3<f64>>,
    pub poses: Vec<Pose>,
    pub frames: Vec<Frame>,
    pub warnings: Vec<String>,
}

fn dv(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

/// Camera looking along `forward` with image `y` pointing down.
fn heading(eye: Vector3<f64>, forward: Vector3<f64>) -> Pose {
    let z = forward.normalize();
    let y = -Vector3::z();
    let x = y.cross(&z);
    Pose::new(Rotation::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])), eye)
}

/// Robot-frame point inside the frustum.
pub fn visible(cfg: &WorldConfig, p: &Vector3<f64>) -> bool {
    let (th, tv) = ((cfg.fov_h / 2.0).to_radians().tan(), (cfg.fov_v / 2.0).to_radians().tan());
    p.z >= cfg.depth_range[0] && p.z <= cfg.depth_range[1] && p.x.abs() <= th * p.z && p.y.abs() <= tv * p.z
}

/// Landmarks uniform in the cube and a level circle traversed with the
/// camera yawed toward its center. Everything is expressed relative to the first
/// pose. Boxes have half-width `noise · distance` around the true local point.
pub fn gen_world(cfg: &WorldConfig) -> Result<World, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = cfg.workspace / 2.0;
    let raw_landmarks: Vec<Vector3<f64>> =
        (0..cfg.n_landmarks).map(|_| Vector3::from_fn(|_, _| rng.random_range(-half..half))).collect();
    let r = cfg.trajectory.radius;
    let reach = half - r - cfg.depth_range[1];
    let center = if reach > 0.0 {
        Vector3::from_fn(|_, _| rng.random_range(-reach..reach))
    } else {
        Vector3::zeros()
    };
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let n = cfg.trajectory.n_frames;
    let raw: Vec<Pose> = (0..n)
        .map(|k| {
            let phi = phase + std::f64::consts::TAU * k as f64 / n as f64;
            let eye = center + Vector3::new(r * phi.cos(), r * phi.sin(), 0.0);
            let yaw = cfg.trajectory.inward_deg.to_radians();
            let tangent = Vector3::new(-phi.sin(), phi.cos(), 0.0);
            let inward = Vector3::new(-phi.cos(), -phi.sin(), 0.0);
            heading(eye, tangent * yaw.cos() + inward * yaw.sin())
        })
        .collect();
    let base = raw[0].inverse();
    let poses: Vec<Pose> = raw.iter().map(|p| base.compose(p)).collect();
    let landmarks: Vec<Vector3<f64>> = raw_landmarks.iter().map(|q| base.apply(q)).collect();

    let mut seen = BTreeSet::new();
    let mut frames = Vec::with_capacity(n);
    let mut warnings = Vec::new();
    for (k, pose) in poses.iter().enumerate() {
        let inv = pose.inverse();
        let mut observations = Vec::new();
        for (i, q) in landmarks.iter().enumerate() {
            let p = inv.apply(q);
            if !visible(cfg, &p) {
                continue;
            }
            let h = Vector3::repeat(cfg.noise * p.norm());
            observations.push(Observation {
                landmark_id: i,
                local_set: HPolytope::from_box(&dv(&(p - h)), &dv(&(p + h))),
                is_new: seen.insert(i),
            });
        }
        if observations.is_empty() {
            warnings.push(format!("frame {k}: no visible landmarks"));
        }
        frames.push(Frame { id: k, observations });
    }
    Ok(World { landmarks, poses, frames, warnings })
}

/// Window over the whole trajectory linking the last frame to landmarks it
/// re-observes after a gap.
pub fn loop_closure(world: &World) -> Option<LoopClosure> {
    let (last, rest) = world.frames.split_last()?;
    let prev = rest.last()?;
    let earlier: BTreeSet<usize> =
        rest[..rest.len() - 1].iter().flat_map(|f| f.observations.iter().map(|o| o.landmark_id)).collect();
    let matches: Vec<LoopMatch> = last
        .observations
        .iter()
        .filter(|o| earlier.contains(&o.landmark_id) && prev.observation(o.landmark_id).is_none())
        .map(|o| LoopMatch { frame_id: last.id, observed_id: o.landmark_id, map_id: o.landmark_id })
        .collect();
    if matches.is_empty() {
        return None;
    }
    Some(LoopClosure { window: world.frames.iter().map(|f| f.id).collect(), matches })
}

/// The loop closure with its first match pointed at the mapped landmark
/// farthest from the true one.
pub fn wrong_closure(world: &World, good: &LoopClosure) -> Option<LoopClosure> {
    let first = good.matches.first()?;
    let truth = world.landmarks[first.observed_id];
    let mapped: BTreeSet<usize> =
        world.frames.iter().flat_map(|f| f.observations.iter().map(|o| o.landmark_id)).collect();
    let far = mapped
        .into_iter()
        .max_by(|&a, &b| (world.landmarks[a] - truth).norm().total_cmp(&(world.landmarks[b] - truth).norm()))?;
    let mut bad = good.clone();
    bad.matches[0].map_id = far;
    Some(bad)
}
