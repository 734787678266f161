use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;
use setslam_core::polytope::{project, vertex_enum, HPolytope};
use setslam_core::slam::SlamOutput;
use setslam_core::uq::{DecomposedPoseSet, PosePolytope};

use crate::trials::{Report, TrialSet};
use crate::SimError;

/// Counterclockwise convex hull, starting from the lowest-then-leftmost point.
pub fn ccw_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let p0 = pts[0];
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut rest: Vec<[f64; 2]> = pts[1..].to_vec();
    rest.sort_by(|a, b| {
        let (ta, tb) = ((a[1] - p0[1]).atan2(a[0] - p0[0]), (b[1] - p0[1]).atan2(b[0] - p0[0]));
        let (da, db) = ((a[0] - p0[0]).hypot(a[1] - p0[1]), (b[0] - p0[0]).hypot(b[1] - p0[1]));
        ta.total_cmp(&tb).then(da.total_cmp(&db))
    });
    let mut hull = vec![p0];
    for p in rest {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

/// Vertices of the shadow of `p` on coordinates `(i, j)`, counterclockwise.
pub fn projected_loop(p: &HPolytope, i: usize, j: usize) -> Result<Vec<[f64; 2]>, SimError> {
    let flat = if p.dim() == 2 && (i, j) == (0, 1) { p.clone() } else { project(p, &[i, j])? };
    let v = vertex_enum(&flat)?;
    Ok(ccw_hull(&v.vertices().iter().map(|x| [x[0], x[1]]).collect::<Vec<_>>()))
}

pub fn pose_translation_loop(p: &PosePolytope) -> Result<Vec<[f64; 2]>, SimError> {
    projected_loop(p.polytope(), 9, 10)
}

pub fn decomposed_translation_loop(d: &DecomposedPoseSet) -> Result<Vec<[f64; 2]>, SimError> {
    projected_loop(&d.translation, 0, 1)
}

pub fn loop_csv(points: &[[f64; 2]]) -> String {
    let mut s = String::from("x,y\n");
    for p in points {
        s.push_str(&format!("{},{}\n", p[0], p[1]));
    }
    s
}

fn write(dir: &Path, rel: &str, body: &str) -> Result<(), SimError> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| SimError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(&path, body).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report data serializes");
    s.push('\n');
    s
}

fn set_loop(s: &TrialSet) -> Result<Vec<[f64; 2]>, SimError> {
    match s {
        TrialSet::Points(p) => projected_loop(p, 0, 1),
        TrialSet::Pose(p) => pose_translation_loop(p),
        TrialSet::Decomposed(d) => decomposed_translation_loop(d),
    }
}

/// `report.json`, `sets/trial_<k>.json` and optionally `plots/trial_<k>.csv`.
pub fn emit_report(report: &Report, dir: &Path, plots: bool) -> Result<(), SimError> {
    write(dir, "report.json", &to_json(report))?;
    for (t, s) in report.trials.iter().zip(&report.sets) {
        write(dir, &format!("sets/trial_{}.json", t.trial), &to_json(s))?;
        if plots {
            write(dir, &format!("plots/trial_{}.csv", t.trial), &loop_csv(&set_loop(s)?))?;
        }
    }
    Ok(())
}

/// Ground-truth containment of a SLAM run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlamSummary {
    pub frames: usize,
    pub landmarks: usize,
    pub poses_inside: usize,
    pub landmarks_inside: usize,
    pub violations: Vec<String>,
}

impl SlamSummary {
    pub fn all_contained(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `report.json` with the summary, `sets/slam.json`, and per-entity plots.
pub fn emit_slam(out: &SlamOutput, summary: &SlamSummary, dir: &Path, plots: bool) -> Result<(), SimError> {
    write(dir, "report.json", &to_json(summary))?;
    write(dir, "sets/slam.json", &to_json(out))?;
    if plots {
        for e in &out.trajectory {
            let pts = match &e.decomposed {
                Some(d) => decomposed_translation_loop(d)?,
                None => pose_translation_loop(&e.pose_set)?,
            };
            write(dir, &format!("plots/pose_{}.csv", e.frame_id), &loop_csv(&pts))?;
        }
        for m in &out.map {
            write(dir, &format!("plots/landmark_{}.csv", m.landmark_id), &loop_csv(&projected_loop(&m.global_set, 0, 1)?))?;
        }
    }
    Ok(())
}

pub(crate) fn dv3(v: &nalgebra::Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}
