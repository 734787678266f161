use serde::{Deserialize, Serialize};
use setslam_core::slam::{run, LoopClosure, SlamConfig, SlamOutput};

use crate::report::{dv3, SlamSummary};
use crate::world::{gen_world, loop_closure, wrong_closure, World, WorldConfig};
use crate::SimError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlamSimConfig {
    pub world: WorldConfig,
    pub slam: SlamConfig,
    /// Smooth over the whole trajectory after the last frame.
    pub loop_closure: bool,
    /// Offer a teleported closure before the true one.
    pub inject_wrong_closure: bool,
}

impl Default for SlamSimConfig {
    fn default() -> Self {
        SlamSimConfig { world: WorldConfig::default(), slam: SlamConfig::default(), loop_closure: true, inject_wrong_closure: false }
    }
}

pub struct SlamSim {
    pub world: World,
    pub output: SlamOutput,
    pub summary: SlamSummary,
}

pub fn summarize(world: &World, out: &SlamOutput, tol: f64) -> SlamSummary {
    let mut violations = Vec::new();
    let mut poses_inside = 0;
    for e in &out.trajectory {
        let truth = &world.poses[e.frame_id];
        let ok = e.pose_set.contains_pose(truth, tol) && e.decomposed.as_ref().is_none_or(|d| d.contains_pose(truth, tol));
        if ok {
            poses_inside += 1;
        } else {
            violations.push(format!("pose {}", e.frame_id));
        }
    }
    let mut landmarks_inside = 0;
    for m in &out.map {
        if m.global_set.contains(&dv3(&world.landmarks[m.landmark_id]), tol) {
            landmarks_inside += 1;
        } else {
            violations.push(format!("landmark {}", m.landmark_id));
        }
    }
    SlamSummary { frames: out.trajectory.len(), landmarks: out.map.len(), poses_inside, landmarks_inside, violations }
}

/// World generation, the pipeline and ground-truth bookkeeping.
pub fn run_slam_sim(cfg: &SlamSimConfig) -> Result<SlamSim, SimError> {
    let world = gen_world(&cfg.world)?;
    let last = world.frames.last().map(|f| f.id).unwrap_or(0);
    let mut closures: Vec<(usize, LoopClosure)> = Vec::new();
    if cfg.loop_closure {
        if let Some(good) = loop_closure(&world) {
            if cfg.inject_wrong_closure {
                if let Some(bad) = wrong_closure(&world, &good) {
                    closures.push((last, bad));
                }
            }
            closures.push((last, good));
        }
    }
    let output = run(&cfg.slam, &world.frames, &closures)?;
    let summary = summarize(&world, &output, 1e-7);
    Ok(SlamSim { world, output, summary })
}
