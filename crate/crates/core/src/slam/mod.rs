//! Guaranteed SLAM: initialization, localization, mapping and loop-closure
//! smoothing over set-valued poses and landmarks.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{PolytopeError, UqError};
use crate::liegroup::{Pose, Rotation};
use crate::lp;
use crate::polytope::{template_normals, Enclosure, HPolytope, TemplateKind};
use crate::uq::{
    backward_uq_multi, compound_direct, compound_indirect, decompose_pose_set, forward_uq, rotball_to_polytope,
    BackwardMode, DecomposedPoseSet, PosePolytope, RotationBallSet,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub landmark_id: usize,
    pub local_set: HPolytope,
    pub is_new: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub id: usize,
    pub observations: Vec<Observation>,
}

impl Frame {
    pub fn observation(&self, landmark_id: usize) -> Option<&Observation> {
        self.observations.iter().find(|o| o.landmark_id == landmark_id)
    }

    fn validate(&self) -> Result<(), SlamError> {
        let mut seen = BTreeSet::new();
        for o in &self.observations {
            if !seen.insert(o.landmark_id) {
                return Err(SlamError::Invalid(format!("frame {}: landmark {} observed twice", self.id, o.landmark_id)));
            }
            if o.local_set.dim() != 3 {
                return Err(SlamError::Invalid(format!("frame {}: landmark {} set is not 3D", self.id, o.landmark_id)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub landmark_id: usize,
    pub global_set: HPolytope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub frame_id: usize,
    pub pose_set: PosePolytope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposed: Option<DecomposedPoseSet>,
}

/// Observation `observed_id` of frame `frame_id` is the map landmark `map_id`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopMatch {
    pub frame_id: usize,
    pub observed_id: usize,
    pub map_id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopClosure {
    pub window: Vec<usize>,
    pub matches: Vec<LoopMatch>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    Relative,
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompoundMode {
    Direct,
    Indirect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapPolicy {
    NewOnly,
    AllVisible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlamConfig {
    pub framework: Framework,
    pub compound: CompoundMode,
    pub map_policy: MapPolicy,
    /// When false, re-registered landmarks overwrite the stored set.
    pub intersect_updates: bool,
    pub backward_mode: BackwardMode,
    /// 3D normals for map sets and indirect translation sets.
    pub point_template: TemplateKind,
    /// 12D normals for direct compounding.
    pub pose_template: TemplateKind,
    /// 9D normals enclosing rotation balls.
    pub rotation_template: TemplateKind,
    pub max_smoothing_iters: usize,
    pub smoothing_tol: f64,
}

impl Default for SlamConfig {
    fn default() -> Self {
        SlamConfig {
            framework: Framework::Relative,
            compound: CompoundMode::Direct,
            map_policy: MapPolicy::NewOnly,
            intersect_updates: true,
            backward_mode: BackwardMode::Chebyshev,
            point_template: TemplateKind::Box,
            pose_template: TemplateKind::Box,
            rotation_template: TemplateKind::Box,
            max_smoothing_iters: 3,
            smoothing_tol: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum Entity {
    Pose(usize),
    Landmark(usize),
}

impl std::fmt::Display for Entity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Entity::Pose(k) => write!(f, "pose {k}"),
            Entity::Landmark(i) => write!(f, "landmark {i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum Event {
    LoopAccepted { frame: usize, iterations: usize, shrink: f64 },
    LoopRejected { frame: usize, entity: Entity },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlamError {
    #[error("inconsistent correspondences at frame {frame}")]
    Inconsistent { frame: usize },
    #[error("lost at frame {frame}: no usable correspondences")]
    Lost { frame: usize },
    #[error("loop closure rejected: empty set for {entity}")]
    LoopRejected { entity: Entity },
    #[error("frame {frame}: {source}")]
    Uq { frame: usize, source: UqError },
    #[error("invalid input: {0}")]
    Invalid(String),
}

fn at(frame: usize) -> impl Fn(UqError) -> SlamError {
    move |source| SlamError::Uq { frame, source }
}

fn poly_at(frame: usize) -> impl Fn(PolytopeError) -> SlamError {
    move |e| SlamError::Uq { frame, source: e.into() }
}

/// The pinned identity pose.
pub fn initialize(frame_id: usize) -> TrajectoryEntry {
    let zero = DVector::zeros(3);
    TrajectoryEntry {
        frame_id,
        pose_set: PosePolytope::point(&Pose::identity()),
        decomposed: Some(DecomposedPoseSet {
            rotation: RotationBallSet { center: Rotation::identity(), radius: 0.0 },
            translation: HPolytope::from_box(&zero, &zero),
        }),
    }
}

/// Rotation-ball enclosure stacked with the translation set, clipped to
/// `|r_ij| ≤ 1`.
fn product_pose_set(d: &DecomposedPoseSet, rot_template: &DMatrix<f64>) -> Result<PosePolytope, UqError> {
    let rot = rotball_to_polytope(&d.rotation, rot_template)?;
    let (ra, rb) = (rot.a(), rot.b());
    let (ta, tb) = (d.translation.a(), d.translation.b());
    let (mr, mt) = (ra.nrows(), ta.nrows());
    let mut h = DMatrix::zeros(mr + mt + 18, 12);
    let mut b = DVector::zeros(mr + mt + 18);
    h.view_mut((0, 0), (mr, 9)).copy_from(ra);
    b.rows_mut(0, mr).copy_from(rb);
    h.view_mut((mr, 9), (mt, 3)).copy_from(ta);
    b.rows_mut(mr, mt).copy_from(tb);
    for k in 0..9 {
        h[(mr + mt + 2 * k, k)] = 1.0;
        h[(mr + mt + 2 * k + 1, k)] = -1.0;
        b[mr + mt + 2 * k] = 1.0;
        b[mr + mt + 2 * k + 1] = 1.0;
    }
    let (h, b) = lp::dedupe_parallel(&h, &b, 1e-12);
    PosePolytope::new(h, b)
}

/// `𝒯_k = 𝒯_{k−1} · 𝒯_k^{k−1}` with the relative set from the
/// correspondences shared with the previous frame.
pub fn localize_relative(
    frame: &Frame,
    prev_frame: &Frame,
    prev: &TrajectoryEntry,
    cfg: &SlamConfig,
) -> Result<TrajectoryEntry, SlamError> {
    let k = frame.id;
    let pairs: Vec<(HPolytope, HPolytope)> = frame
        .observations
        .iter()
        .filter_map(|o| prev_frame.observation(o.landmark_id).map(|q| (o.local_set.clone(), q.local_set.clone())))
        .collect();
    if pairs.is_empty() {
        return Err(SlamError::Lost { frame: k });
    }
    let Enclosure::Set(rel) = backward_uq_multi(&pairs, cfg.backward_mode).map_err(at(k))? else {
        return Err(SlamError::Inconsistent { frame: k });
    };
    match cfg.compound {
        CompoundMode::Direct => {
            let t = template_normals(&cfg.pose_template, 12).map_err(poly_at(k))?;
            let Enclosure::Set(pose_set) = compound_direct(&prev.pose_set, &rel, &t).map_err(at(k))? else {
                return Err(SlamError::Inconsistent { frame: k });
            };
            Ok(TrajectoryEntry { frame_id: k, pose_set, decomposed: None })
        }
        CompoundMode::Indirect => {
            let prev_d = match &prev.decomposed {
                Some(d) => d.clone(),
                None => decompose_pose_set(&prev.pose_set)
                    .map_err(at(k))?
                    .set()
                    .ok_or(SlamError::Inconsistent { frame: prev.frame_id })?,
            };
            let rel_d = decompose_pose_set(&rel).map_err(at(k))?.set().ok_or(SlamError::Inconsistent { frame: k })?;
            let t = template_normals(&cfg.point_template, 3).map_err(poly_at(k))?;
            let d = compound_indirect(&prev_d, &rel_d, &t).map_err(at(k))?;
            let rt = template_normals(&cfg.rotation_template, 9).map_err(poly_at(k))?;
            let pose_set = product_pose_set(&d, &rt).map_err(at(k))?;
            Ok(TrajectoryEntry { frame_id: k, pose_set, decomposed: Some(d) })
        }
    }
}

/// `𝒯_k` from every observed landmark already in the map.
pub fn localize_global(frame: &Frame, map: &BTreeMap<usize, MapEntry>, cfg: &SlamConfig) -> Result<TrajectoryEntry, SlamError> {
    let k = frame.id;
    let pairs: Vec<(HPolytope, HPolytope)> = frame
        .observations
        .iter()
        .filter_map(|o| map.get(&o.landmark_id).map(|m| (o.local_set.clone(), m.global_set.clone())))
        .collect();
    if pairs.is_empty() {
        return Err(SlamError::Lost { frame: k });
    }
    let Enclosure::Set(pose_set) = backward_uq_multi(&pairs, cfg.backward_mode).map_err(at(k))? else {
        return Err(SlamError::Inconsistent { frame: k });
    };
    Ok(TrajectoryEntry { frame_id: k, pose_set, decomposed: None })
}

/// Rows of `stored` with offsets lowered to the support of `stored ∩ new`;
/// `None` when the intersection is empty.
pub fn tighten(stored: &HPolytope, new: &HPolytope) -> Result<Option<HPolytope>, PolytopeError> {
    let both = stored.stack(new)?;
    if both.is_empty()? {
        return Ok(None);
    }
    let slack = 1e-9 * both.scale();
    let mut b = stored.b().clone();
    for m in 0..b.len() {
        let dir = stored.a().row(m).transpose();
        if let Some(s) = both.support(&dir)? {
            b[m] = b[m].min(s + slack);
        }
    }
    Ok(Some(HPolytope::from_normalized(stored.a().clone(), b)))
}

/// Forward sets of the registered observations; the caller inserts them.
pub fn map_update(
    frame: &Frame,
    entry: &TrajectoryEntry,
    map: &BTreeMap<usize, MapEntry>,
    cfg: &SlamConfig,
) -> Result<Vec<MapEntry>, SlamError> {
    let k = frame.id;
    let t = template_normals(&cfg.point_template, 3).map_err(poly_at(k))?;
    let mut delta = Vec::new();
    for o in &frame.observations {
        let old = map.get(&o.landmark_id);
        let register = match cfg.map_policy {
            MapPolicy::NewOnly => o.is_new || old.is_none(),
            MapPolicy::AllVisible => true,
        };
        if !register {
            continue;
        }
        let Enclosure::Set(fresh) = forward_uq(&o.local_set, &entry.pose_set, &t).map_err(at(k))? else {
            return Err(SlamError::Inconsistent { frame: k });
        };
        let global_set = match old {
            Some(old) if cfg.intersect_updates => {
                tighten(&old.global_set, &fresh).map_err(poly_at(k))?.ok_or(SlamError::Inconsistent { frame: k })?
            }
            _ => fresh,
        };
        delta.push(MapEntry { landmark_id: o.landmark_id, global_set });
    }
    Ok(delta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlamState {
    pub config: SlamConfig,
    pub frames: Vec<Frame>,
    pub trajectory: Vec<TrajectoryEntry>,
    pub map: BTreeMap<usize, MapEntry>,
    pub events: Vec<Event>,
}

impl SlamState {
    pub fn new(config: SlamConfig) -> Self {
        SlamState { config, frames: Vec::new(), trajectory: Vec::new(), map: BTreeMap::new(), events: Vec::new() }
    }

    fn index_of(&self, frame_id: usize) -> Option<usize> {
        self.frames.iter().position(|f| f.id == frame_id)
    }

    /// Localizes `frame`, registers its landmarks and appends it.
    pub fn process(&mut self, frame: Frame) -> Result<(), SlamError> {
        frame.validate()?;
        if self.index_of(frame.id).is_some() {
            return Err(SlamError::Invalid(format!("frame {} processed twice", frame.id)));
        }
        let entry = match (self.trajectory.last(), self.config.framework) {
            (None, _) => initialize(frame.id),
            (Some(prev), Framework::Relative) => {
                let prev_frame = self.frames.last().expect("frames and trajectory in step");
                localize_relative(&frame, prev_frame, prev, &self.config)?
            }
            (Some(_), Framework::Global) => localize_global(&frame, &self.map, &self.config)?,
        };
        for m in map_update(&frame, &entry, &self.map, &self.config)? {
            self.map.insert(m.landmark_id, m);
        }
        self.frames.push(frame);
        self.trajectory.push(entry);
        Ok(())
    }

    pub fn output(&self) -> SlamOutput {
        SlamOutput {
            trajectory: self.trajectory.clone(),
            map: self.map.values().cloned().collect(),
            events: self.events.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothReport {
    pub iterations: usize,
    /// Largest relative offset decrease per iteration.
    pub shrink: Vec<f64>,
}

fn relative_shrink(old: &DVector<f64>, new: &DVector<f64>) -> f64 {
    let scale = old.amax().max(1e-12);
    old.iter().zip(new.iter()).map(|(o, n)| (o - n) / scale).fold(0.0, f64::max)
}

/// Alternating map and pose refinement over `window`. On rejection the state
/// is left untouched.
pub fn smooth(window: &LoopClosure, state: &mut SlamState) -> Result<SmoothReport, SlamError> {
    if window.window.is_empty() {
        return Err(SlamError::Invalid("empty loop window".into()));
    }
    let idx: Vec<usize> = window
        .window
        .iter()
        .map(|&f| state.index_of(f).ok_or_else(|| SlamError::Invalid(format!("frame {f} not processed"))))
        .collect::<Result<_, _>>()?;
    let mut work = state.clone();
    let cfg = work.config.clone();
    let t3 = template_normals(&cfg.point_template, 3).map_err(poly_at(window.window[0]))?;

    // (frame index, observation index, map id)
    let mut links: Vec<(usize, usize, usize)> = Vec::new();
    for &i in &idx {
        let frame = &work.frames[i];
        for (j, o) in frame.observations.iter().enumerate() {
            let target = window
                .matches
                .iter()
                .find(|m| m.frame_id == frame.id && m.observed_id == o.landmark_id)
                .map(|m| m.map_id)
                .unwrap_or(o.landmark_id);
            if work.map.contains_key(&target) {
                links.push((i, j, target));
            }
        }
    }

    let mut report = SmoothReport { iterations: 0, shrink: Vec::new() };
    for _ in 0..cfg.max_smoothing_iters {
        let mut shrink = 0.0f64;
        let ids: BTreeSet<usize> = links.iter().map(|l| l.2).collect();
        for id in ids {
            let mut set = work.map[&id].global_set.clone();
            for &(i, j, _) in links.iter().filter(|l| l.2 == id) {
                let frame = work.frames[i].id;
                let obs = &work.frames[i].observations[j];
                let fresh = match forward_uq(&obs.local_set, &work.trajectory[i].pose_set, &t3).map_err(at(frame))? {
                    Enclosure::Set(s) => s,
                    Enclosure::Empty => return Err(SlamError::LoopRejected { entity: Entity::Pose(frame) }),
                };
                set = tighten(&set, &fresh)
                    .map_err(poly_at(frame))?
                    .ok_or(SlamError::LoopRejected { entity: Entity::Landmark(id) })?;
            }
            shrink = shrink.max(relative_shrink(work.map[&id].global_set.b(), set.b()));
            work.map.get_mut(&id).expect("linked id in map").global_set = set;
        }
        for &i in &idx {
            let frame = work.frames[i].id;
            let pairs: Vec<(HPolytope, HPolytope)> = links
                .iter()
                .filter(|l| l.0 == i)
                .map(|&(_, j, id)| (work.frames[i].observations[j].local_set.clone(), work.map[&id].global_set.clone()))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let Enclosure::Set(fresh) = backward_uq_multi(&pairs, cfg.backward_mode).map_err(at(frame))? else {
                return Err(SlamError::LoopRejected { entity: Entity::Pose(frame) });
            };
            let old = work.trajectory[i].pose_set.polytope();
            let tight = tighten(old, fresh.polytope())
                .map_err(poly_at(frame))?
                .ok_or(SlamError::LoopRejected { entity: Entity::Pose(frame) })?;
            shrink = shrink.max(relative_shrink(old.b(), tight.b()));
            work.trajectory[i].pose_set = PosePolytope::from_polytope(tight).map_err(at(frame))?;
        }
        report.iterations += 1;
        report.shrink.push(shrink);
        if shrink < cfg.smoothing_tol {
            break;
        }
    }
    *state = work;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlamOutput {
    pub trajectory: Vec<TrajectoryEntry>,
    pub map: Vec<MapEntry>,
    pub events: Vec<Event>,
}

impl SlamOutput {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite output serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SlamError> {
        serde_json::from_str(s).map_err(|e| SlamError::Invalid(e.to_string()))
    }
}

/// Processes `frames` in order; `closures` holds `(frame id, window)` pairs
/// applied right after that frame. Rejected closures are logged, not fatal.
pub fn run(config: &SlamConfig, frames: &[Frame], closures: &[(usize, LoopClosure)]) -> Result<SlamOutput, SlamError> {
    let mut state = SlamState::new(config.clone());
    for frame in frames {
        state.process(frame.clone())?;
        for (_, lc) in closures.iter().filter(|(f, _)| *f == frame.id) {
            match smooth(lc, &mut state) {
                Ok(r) => state.events.push(Event::LoopAccepted {
                    frame: frame.id,
                    iterations: r.iterations,
                    shrink: r.shrink.last().copied().unwrap_or(0.0),
                }),
                Err(SlamError::LoopRejected { entity }) => {
                    state.events.push(Event::LoopRejected { frame: frame.id, entity })
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(state.output())
}

