use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use setslam_core::liegroup::{exp_map, geodesic_distance, Pose, Rotation};
use setslam_core::polytope::{
    enclose_ellipsoid, sample_uniform, template_normals, Ellipsoid, Enclosure, HPolytope, TemplateKind,
};
use setslam_core::uq::{
    backward_uq_multi, compound_direct, compound_indirect, decompose_pose_set, forward_uq, sample_pose_set,
    BackwardMode, DecomposedPoseSet, PosePolytope,
};

use crate::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Forward,
    Backward,
    CompoundDirect,
    CompoundIndirect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub primitive: Primitive,
    pub n_trials: usize,
    pub n_samples: usize,
    /// Side lengths of the point boxes.
    pub point_box: [f64; 2],
    /// Half-widths of the pose boxes on rotation entries.
    pub rot_halfwidth: [f64; 2],
    /// Half-widths of the pose boxes on translation entries.
    pub trans_halfwidth: [f64; 2],
    /// Semi-axis lengths of the backward ellipsoids.
    pub semi_axes: [f64; 2],
    pub n_points: usize,
    /// 3D normals for point sets and translation sets.
    pub template: TemplateKind,
    /// 12D normals for direct compounding.
    pub pose_template: TemplateKind,
    pub backward_mode: BackwardMode,
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            primitive: Primitive::Forward,
            n_trials: 6,
            n_samples: 1000,
            point_box: [0.08, 0.2],
            rot_halfwidth: [0.01, 0.02],
            trans_halfwidth: [0.05, 0.1],
            semi_axes: [0.01, 0.05],
            n_points: 8,
            template: TemplateKind::BoxDiag45,
            pose_template: TemplateKind::Box,
            backward_mode: BackwardMode::Chebyshev,
            tol: 1e-9,
            seed: 0,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let range_ok = |r: [f64; 2]| r[0] >= 0.0 && r[1] >= r[0] && r[1].is_finite();
        if self.n_samples == 0 {
            return Err(SimError::Config("n_samples must be at least 1".into()));
        }
        if ![self.point_box, self.rot_halfwidth, self.trans_halfwidth, self.semi_axes].into_iter().all(range_ok) {
            return Err(SimError::Config("ranges must satisfy 0 <= lo <= hi".into()));
        }
        if self.semi_axes[0] <= 0.0 || self.n_points == 0 {
            return Err(SimError::Config("backward trials need positive semi-axes and points".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(SimError::Config("tol must be nonnegative".into()));
        }
        template_normals(&self.template, 3)?;
        template_normals(&self.pose_template, 12)?;
        Ok(())
    }

    /// Seed of trial `k`, shared by every primitive.
    pub fn trial_seed(&self, k: usize) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64 + 1)
    }
}

fn draw(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] { rng.random_range(r[0]..=r[1]) } else { r[0] }
}

pub fn random_rotation(rng: &mut impl Rng) -> Rotation {
    let q = Quaternion::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    Rotation::from_matrix_unchecked(*UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix())
}

fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let w = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if w.norm() > 1e-9 {
            return w.normalize();
        }
    }
}

pub fn random_pose(rng: &mut impl Rng) -> Pose {
    Pose::new(random_rotation(rng), Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)))
}

fn dv(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn pose_box(rng: &mut impl Rng, cfg: &TrialConfig, t: &Pose) -> PosePolytope {
    let rot = draw(rng, cfg.rot_halfwidth);
    let trans = draw(rng, cfg.trans_halfwidth);
    PosePolytope::around(t, rot, trans)
}

pub struct ForwardInstance {
    pub pose: Pose,
    pub point: Vector3<f64>,
    pub pose_set: PosePolytope,
    pub point_set: HPolytope,
}

pub fn forward_instance(cfg: &TrialConfig, trial: usize) -> ForwardInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.trial_seed(trial));
    let pose = random_pose(&mut rng);
    let point = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
    let side = Vector3::from_fn(|_, _| draw(&mut rng, cfg.point_box));
    let point_set = HPolytope::from_box(&dv(&(point - side / 2.0)), &dv(&(point + side / 2.0)));
    let pose_set = pose_box(&mut rng, cfg, &pose);
    ForwardInstance { pose, point, pose_set, point_set }
}

pub struct BackwardInstance {
    pub pose: Pose,
    pub points: Vec<Vector3<f64>>,
    pub ellipsoids: Vec<Ellipsoid>,
    pub global_sets: Vec<HPolytope>,
}

impl BackwardInstance {
    pub fn pairs(&self) -> Vec<(HPolytope, HPolytope)> {
        self.points
            .iter()
            .zip(&self.global_sets)
            .map(|(p, g)| (HPolytope::from_box(&dv(p), &dv(p)), g.clone()))
            .collect()
    }

    /// `T` with every `R p_i + t` inside its ellipsoid.
    pub fn feasible(&self, t: &Pose) -> bool {
        self.points.iter().zip(&self.ellipsoids).all(|(p, e)| ellipsoid_contains(e, &t.apply(p)))
    }
}

fn ellipsoid_contains(e: &Ellipsoid, x: &Vector3<f64>) -> bool {
    let d = dv(x) - &e.center;
    match e.shape.clone().cholesky() {
        Some(c) => d.dot(&c.solve(&d)) <= e.scale * e.scale,
        None => false,
    }
}

/// Exact points, one ellipsoid per image point, each enclosed by the template.
pub fn backward_instance(cfg: &TrialConfig, trial: usize) -> Result<BackwardInstance, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.trial_seed(trial));
    let pose = random_pose(&mut rng);
    let template = template_normals(&cfg.template, 3)?;
    let mut points = Vec::new();
    let mut ellipsoids = Vec::new();
    let mut global_sets = Vec::new();
    for _ in 0..cfg.n_points {
        let p = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let axes = Vector3::from_fn(|_, _| draw(&mut rng, cfg.semi_axes));
        let u = *random_rotation(&mut rng).matrix();
        let shape = u * Matrix3::from_diagonal(&axes.map(|a| a * a)) * u.transpose();
        let z = unit_vector(&mut rng) * rng.random_range(0.0..0.9);
        let center = pose.apply(&p) - u * Matrix3::from_diagonal(&axes) * z;
        let e = Ellipsoid { center: dv(&center), shape: DMatrix::from_column_slice(3, 3, shape.as_slice()), scale: 1.0 };
        global_sets.push(enclose_ellipsoid(&e, &template)?);
        points.push(p);
        ellipsoids.push(e);
    }
    Ok(BackwardInstance { pose, points, ellipsoids, global_sets })
}

const PILOT: usize = 200;
const MAX_PROPOSALS: usize = 20_000_000;

/// Samples of the feasible pose set. Rotations are drawn in a geodesic ball
/// around the true rotation whose radius doubles until accepted samples stay
/// in its inner half; translations are drawn from the ball every feasible
/// pose satisfies given its rotation.
pub fn sample_backward_original(inst: &BackwardInstance, n: usize, seed: u64) -> Result<Vec<Pose>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = inst.points.len() as f64;
    let p_bar = inst.points.iter().sum::<Vector3<f64>>() / k;
    let c_bar = inst.ellipsoids.iter().map(|e| Vector3::new(e.center[0], e.center[1], e.center[2])).sum::<Vector3<f64>>() / k;
    let rho = inst
        .ellipsoids
        .iter()
        .map(|e| e.scale * e.shape.clone().symmetric_eigenvalues().max().max(0.0).sqrt())
        .sum::<f64>()
        / k;
    let r0 = inst.pose.rotation;
    let mut proposals = 0usize;
    let mut propose = |rng: &mut ChaCha8Rng, theta_max: f64| -> Result<Option<(Pose, f64)>, SimError> {
        proposals += 1;
        if proposals > MAX_PROPOSALS {
            return Err(SimError::Sampling("feasible pose set too thin".into()));
        }
        let theta = rng.random_range(0.0..=theta_max);
        let r = r0.compose(&exp_map(&(unit_vector(rng) * theta)));
        let e = unit_vector(rng) * rho * rng.random::<f64>().cbrt();
        let t = c_bar - r.matrix() * p_bar + e;
        let pose = Pose::new(r, t);
        Ok(inst.feasible(&pose).then_some((pose, theta)))
    };
    let mut theta_max = 0.02f64;
    loop {
        let mut reach = 0.0f64;
        let mut got = 0;
        while got < PILOT {
            if let Some((_, th)) = propose(&mut rng, theta_max)? {
                reach = reach.max(th);
                got += 1;
            }
        }
        if reach <= 0.5 * theta_max || theta_max >= std::f64::consts::PI {
            break;
        }
        theta_max = (2.0 * theta_max).min(std::f64::consts::PI);
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if let Some((pose, _)) = propose(&mut rng, theta_max)? {
            out.push(pose);
        }
    }
    Ok(out)
}

pub struct CompoundInstance {
    pub t1: Pose,
    pub t2: Pose,
    pub p1: PosePolytope,
    pub p2: PosePolytope,
}

pub fn compound_instance(cfg: &TrialConfig, trial: usize) -> CompoundInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.trial_seed(trial));
    let t1 = random_pose(&mut rng);
    let t2 = random_pose(&mut rng);
    let p1 = pose_box(&mut rng, cfg, &t1);
    let p2 = pose_box(&mut rng, cfg, &t2);
    CompoundInstance { t1, t2, p1, p2 }
}

/// `T₁T₂` for independent samples of both factors.
pub fn sample_compound_original(inst: &CompoundInstance, n: usize, seed: u64) -> Result<Vec<Pose>, SimError> {
    let a = sample_pose_set(&inst.p1, n, seed)?;
    let b = sample_pose_set(&inst.p2, n, seed.wrapping_add(1))?;
    Ok(a.iter().zip(&b).map(|(x, y)| x.compose(y)).collect())
}

pub const SPREAD_CENTERS: [[f64; 3]; 4] = [[10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0], [10.0, 10.0, 10.0]];
pub const SPREAD_RADIUS: f64 = 0.2;

/// Summed bounding-box volume of the balls around each center carried by
/// every pose.
pub fn spread_volume(poses: &[Pose]) -> f64 {
    SPREAD_CENTERS
        .iter()
        .map(|c| {
            let c = Vector3::from(*c);
            let mut lo = Vector3::repeat(f64::INFINITY);
            let mut hi = Vector3::repeat(f64::NEG_INFINITY);
            for t in poses {
                let x = t.apply(&c);
                lo = lo.inf(&x);
                hi = hi.sup(&x);
            }
            (hi - lo).add_scalar(2.0 * SPREAD_RADIUS).product()
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrialSet {
    Points(HPolytope),
    Pose(PosePolytope),
    Decomposed(DecomposedPoseSet),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub n_samples: usize,
    pub inside: usize,
    /// `inside / n_samples`.
    pub containment: f64,
    pub max_violation: f64,
    pub violations: Vec<usize>,
    pub facet_bounds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: TrialConfig,
    pub trials: Vec<TrialReport>,
    /// Wall-clock seconds per trial.
    #[serde(default)]
    pub timing: Vec<f64>,
    #[serde(skip)]
    pub sets: Vec<TrialSet>,
}

impl Report {
    pub fn all_contained(&self) -> bool {
        self.trials.iter().all(|t| t.inside == t.n_samples)
    }
}

fn tally(trial: usize, violations: Vec<(usize, f64)>, n: usize, facet_bounds: Vec<f64>) -> TrialReport {
    let max_violation = violations.iter().map(|v| v.1).fold(0.0, f64::max);
    let bad: Vec<usize> = violations.into_iter().map(|v| v.0).collect();
    let inside = n - bad.len();
    TrialReport {
        trial,
        n_samples: n,
        inside,
        containment: inside as f64 / n as f64,
        max_violation,
        violations: bad,
        facet_bounds,
        spread: None,
        theta: None,
    }
}

fn pose_violations(set: &PosePolytope, samples: &[Pose], tol: f64) -> Vec<(usize, f64)> {
    samples
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            let v = set.polytope().max_violation(&DVector::from_column_slice(t.to_vector().as_slice()));
            (v > tol).then_some((i, v))
        })
        .collect()
}

fn decomposed_violation(d: &DecomposedPoseSet, t: &Pose) -> f64 {
    let rot = geodesic_distance(&t.rotation, &d.rotation.center) - d.rotation.radius;
    rot.max(d.translation.max_violation(&dv(&t.translation)))
}

pub fn forward_trial(cfg: &TrialConfig, trial: usize) -> Result<(TrialReport, TrialSet), SimError> {
    let inst = forward_instance(cfg, trial);
    let template = template_normals(&cfg.template, 3)?;
    let out = match forward_uq(&inst.point_set, &inst.pose_set, &template)? {
        Enclosure::Set(s) => s,
        Enclosure::Empty => return Err(SimError::Sampling("forward set unexpectedly empty".into())),
    };
    let seed = cfg.trial_seed(trial) ^ 0xF0F0;
    let poses = sample_pose_set(&inst.pose_set, cfg.n_samples, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_uniform(&inst.point_set, cfg.n_samples, &mut rng)?;
    let violations: Vec<(usize, f64)> = poses
        .iter()
        .zip(&points)
        .enumerate()
        .filter_map(|(i, (t, p))| {
            let q = t.apply(&Vector3::new(p[0], p[1], p[2]));
            let v = out.max_violation(&dv(&q));
            (v > cfg.tol).then_some((i, v))
        })
        .collect();
    let report = tally(trial, violations, cfg.n_samples, out.b().iter().copied().collect());
    Ok((report, TrialSet::Points(out)))
}

pub fn backward_trial(cfg: &TrialConfig, trial: usize) -> Result<(TrialReport, TrialSet), SimError> {
    let inst = backward_instance(cfg, trial)?;
    let out = match backward_uq_multi(&inst.pairs(), cfg.backward_mode)? {
        Enclosure::Set(s) => s,
        Enclosure::Empty => return Err(SimError::Sampling("backward set unexpectedly empty".into())),
    };
    let samples = sample_backward_original(&inst, cfg.n_samples, cfg.trial_seed(trial) ^ 0xB0B0)?;
    let report = tally(trial, pose_violations(&out, &samples, cfg.tol), cfg.n_samples, out.d().iter().copied().collect());
    Ok((report, TrialSet::Pose(out)))
}

pub fn compound_direct_trial(cfg: &TrialConfig, trial: usize) -> Result<(TrialReport, TrialSet), SimError> {
    let inst = compound_instance(cfg, trial);
    let template = template_normals(&cfg.pose_template, 12)?;
    let out = match compound_direct(&inst.p1, &inst.p2, &template)? {
        Enclosure::Set(s) => s,
        Enclosure::Empty => return Err(SimError::Sampling("compound set unexpectedly empty".into())),
    };
    let samples = sample_compound_original(&inst, cfg.n_samples, cfg.trial_seed(trial) ^ 0xC0C0)?;
    let mut report = tally(trial, pose_violations(&out, &samples, cfg.tol), cfg.n_samples, out.d().iter().copied().collect());
    report.spread = Some(spread_volume(&sample_pose_set(&out, cfg.n_samples, cfg.trial_seed(trial) ^ 0x5050)?));
    Ok((report, TrialSet::Pose(out)))
}

pub fn compound_indirect_trial(cfg: &TrialConfig, trial: usize) -> Result<(TrialReport, TrialSet), SimError> {
    let inst = compound_instance(cfg, trial);
    let template = template_normals(&cfg.template, 3)?;
    let empty = || SimError::Sampling("compound set unexpectedly empty".into());
    let d1 = decompose_pose_set(&inst.p1)?.set().ok_or_else(empty)?;
    let d2 = decompose_pose_set(&inst.p2)?.set().ok_or_else(empty)?;
    let out = compound_indirect(&d1, &d2, &template)?;
    let samples = sample_compound_original(&inst, cfg.n_samples, cfg.trial_seed(trial) ^ 0xC0C0)?;
    let violations = samples
        .iter()
        .enumerate()
        .filter_map(|(i, t)| {
            let v = decomposed_violation(&out, t);
            (v > cfg.tol).then_some((i, v))
        })
        .collect();
    let mut report = tally(trial, violations, cfg.n_samples, out.translation.b().iter().copied().collect());
    report.spread = Some(spread_volume(&sample_pose_set(&out, cfg.n_samples, cfg.trial_seed(trial) ^ 0x5050)?));
    report.theta = Some(out.rotation.radius);
    Ok((report, TrialSet::Decomposed(out)))
}

/// Runs `n_trials` instances of the configured primitive and counts how many
/// samples of the true set land inside the computed set.
pub fn conservatism_test(cfg: &TrialConfig) -> Result<Report, SimError> {
    cfg.validate()?;
    let mut report = Report { config: cfg.clone(), trials: Vec::new(), timing: Vec::new(), sets: Vec::new() };
    for k in 0..cfg.n_trials {
        let start = Instant::now();
        let (r, s) = match cfg.primitive {
            Primitive::Forward => forward_trial(cfg, k)?,
            Primitive::Backward => backward_trial(cfg, k)?,
            Primitive::CompoundDirect => compound_direct_trial(cfg, k)?,
            Primitive::CompoundIndirect => compound_indirect_trial(cfg, k)?,
        };
        report.timing.push(start.elapsed().as_secs_f64());
        report.trials.push(r);
        report.sets.push(s);
    }
    Ok(report)
}
