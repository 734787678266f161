//! Conformal calibration of stereo-triangulated points.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x4, SMatrix, SVector, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::error::PolytopeError;
use crate::liegroup::{hat, Rotation};
use crate::polytope::{enclose_ellipsoid, Ellipsoid, HPolytope};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("degenerate triangulation")]
    Degenerate,
    #[error("uncalibrated: quantile is infinite")]
    Uncalibrated,
    #[error("miscoverage {0} outside (0, 1)")]
    BadDelta(f64),
    #[error("empty calibration set")]
    NoScores,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid rig: {0}")]
    BadRig(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// Right camera pose relative to the left: `p_R = R_LR p_L + t_LR`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoRig {
    #[serde(rename = "R_LR")]
    pub r_lr: Rotation,
    #[serde(rename = "t_LR")]
    pub t_lr: Vector3<f64>,
}

impl StereoRig {
    pub fn new(r_lr: Rotation, t_lr: Vector3<f64>) -> Result<Self, ConformalError> {
        if !(t_lr.norm() > 0.0) || t_lr.iter().any(|x| !x.is_finite()) {
            return Err(ConformalError::BadRig("baseline must be nonzero".into()));
        }
        Ok(StereoRig { r_lr, t_lr })
    }

    /// Rectified pair with the right camera `baseline` meters along +x.
    pub fn horizontal(baseline: f64) -> Self {
        StereoRig { r_lr: Rotation::identity(), t_lr: Vector3::new(-baseline, 0.0, 0.0) }
    }

    /// Normalized image coordinates of a left-frame point in both cameras.
    pub fn project(&self, p: &Vector3<f64>) -> (Vector2<f64>, Vector2<f64>) {
        let q = self.r_lr.matrix() * p + self.t_lr;
        (Vector2::new(p.x / p.z, p.y / p.z), Vector2::new(q.x / q.z, q.y / q.z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub u: Vector2<f64>,
    pub v: Vector2<f64>,
    pub p_true: Vector3<f64>,
}

/// Either a score from the sorted list or the `+∞` sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantile {
    Finite(f64),
    Infinite,
}

impl Quantile {
    pub fn finite(self) -> Option<f64> {
        match self {
            Quantile::Finite(c) => Some(c),
            Quantile::Infinite => None,
        }
    }
}

impl Serialize for Quantile {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Quantile::Finite(c) => s.serialize_f64(*c),
            Quantile::Infinite => s.serialize_str("Infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for Quantile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(c) if c.is_finite() && c >= 0.0 => Ok(Quantile::Finite(c)),
            Raw::Text(t) if t == "Infinity" => Ok(Quantile::Infinite),
            _ => Err(serde::de::Error::custom("C must be a nonnegative number or \"Infinity\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    #[serde(rename = "C")]
    pub c: Quantile,
    pub delta: f64,
    #[serde(rename = "L")]
    pub l: usize,
}

impl CalibrationResult {
    /// True when the calibration set was too small for the requested level.
    pub fn is_sentinel(&self) -> bool {
        self.c == Quantile::Infinite
    }
}

fn homog_hat(u: &Vector2<f64>) -> Matrix3<f64> {
    hat(&Vector3::new(u.x, u.y, 1.0))
}

type Stack = SMatrix<f64, 6, 3>;

fn system(u: &Vector2<f64>, v: &Vector2<f64>, rig: &StereoRig) -> (Stack, SVector<f64, 6>) {
    let top = homog_hat(u);
    let bottom = homog_hat(v) * rig.r_lr.matrix();
    let mut h = Stack::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&top);
    h.fixed_view_mut::<3, 3>(3, 0).copy_from(&bottom);
    let mut y = SVector::<f64, 6>::zeros();
    y.fixed_rows_mut::<3>(3).copy_from(&(-homog_hat(v) * rig.t_lr));
    (h, y)
}

/// Least-squares point and `Σ = J Jᵀ`, `J = ∂p̂/∂(u, v)`.
pub fn triangulate(u: &Vector2<f64>, v: &Vector2<f64>, rig: &StereoRig) -> Result<(Vector3<f64>, Matrix3<f64>), ConformalError> {
    let (h, y) = system(u, v, rig);
    let n = h.transpose() * h;
    let eig = n.symmetric_eigenvalues();
    if !(eig.min() > 1e-10 * eig.max()) {
        return Err(ConformalError::Degenerate);
    }
    let ninv = n.try_inverse().ok_or(ConformalError::Degenerate)?;
    let p = ninv * h.transpose() * y;
    let resid = y - h * p;
    let mut j = Matrix3x4::zeros();
    for k in 0..4 {
        let mut e = Vector3::zeros();
        e[k % 2] = 1.0;
        let mut dh = Stack::zeros();
        let mut dy = SVector::<f64, 6>::zeros();
        if k < 2 {
            dh.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&e));
        } else {
            dh.fixed_view_mut::<3, 3>(3, 0).copy_from(&(hat(&e) * rig.r_lr.matrix()));
            dy.fixed_rows_mut::<3>(3).copy_from(&(-hat(&e) * rig.t_lr));
        }
        let dp = ninv * (dh.transpose() * resid + h.transpose() * (dy - dh * p));
        j.set_column(k, &dp);
    }
    Ok((p, j * j.transpose()))
}

/// `‖p̂ − p°‖_Σ` with `Σ + 1e-12·I` inverted.
pub fn nonconformity(p_hat: &Vector3<f64>, sigma: &Matrix3<f64>, p_true: &Vector3<f64>) -> f64 {
    let reg = sigma + Matrix3::identity() * 1e-12;
    let d = p_hat - p_true;
    let x = reg.cholesky().map(|c| c.solve(&d)).or_else(|| reg.try_inverse().map(|i| i * d));
    match x {
        Some(x) => d.dot(&x).max(0.0).sqrt(),
        None => f64::INFINITY,
    }
}

/// Element `⌈(1−δ)(L+1)⌉` (1-based) of the sorted scores with `+∞` appended.
pub fn calibrate(scores: &[f64], delta: f64) -> Result<CalibrationResult, ConformalError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ConformalError::BadDelta(delta));
    }
    if scores.is_empty() {
        return Err(ConformalError::NoScores);
    }
    let l = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let p = ((1.0 - delta) * (l + 1) as f64 - 1e-9).ceil().max(1.0) as usize;
    let c = if p > l || !sorted[p - 1].is_finite() { Quantile::Infinite } else { Quantile::Finite(sorted[p - 1]) };
    Ok(CalibrationResult { c, delta, l })
}

/// Scores every record and calibrates; degenerate records are an error.
pub fn calibrate_records(records: &[CalibrationRecord], rig: &StereoRig, delta: f64) -> Result<CalibrationResult, ConformalError> {
    let scores = records
        .iter()
        .map(|r| triangulate(&r.u, &r.v, rig).map(|(p, s)| nonconformity(&p, &s, &r.p_true)))
        .collect::<Result<Vec<_>, _>>()?;
    calibrate(&scores, delta)
}

/// Template enclosure of `{p : ‖p − p̂‖_Σ ≤ C}`.
pub fn point_uncertainty(p_hat: &Vector3<f64>, sigma: &Matrix3<f64>, c: Quantile, template: &DMatrix<f64>) -> Result<HPolytope, ConformalError> {
    let c = c.finite().ok_or(ConformalError::Uncalibrated)?;
    let e = Ellipsoid {
        center: DVector::from_column_slice(p_hat.as_slice()),
        shape: DMatrix::from_column_slice(3, 3, sigma.as_slice()),
        scale: c,
    };
    Ok(enclose_ellipsoid(&e, template)?)
}

/// One record per line; blank lines are skipped.
pub fn parse_records(text: &str) -> Result<Vec<CalibrationRecord>, ConformalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: CalibrationRecord =
            serde_json::from_str(line).map_err(|e| ConformalError::Parse { line: i + 1, msg: e.to_string() })?;
        if r.u.iter().chain(r.v.iter()).chain(r.p_true.iter()).any(|x| !x.is_finite()) {
            return Err(ConformalError::Parse { line: i + 1, msg: "non-finite value".into() });
        }
        out.push(r);
    }
    Ok(out)
}

pub fn write_records(records: &[CalibrationRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("finite record serializes"));
        s.push('\n');
    }
    s
}

/// Synthetic calibration data: points uniform in a frustum, image noise
/// uniform in a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub depth: (f64, f64),
    /// Half-width of the noise box in normalized image units.
    pub noise: f64,
    pub baseline: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { fov_h_deg: 60.0, fov_v_deg: 60.0, depth: (0.5, 5.0), noise: 1e-3, baseline: 0.12 }
    }
}

impl GeneratorConfig {
    pub fn rig(&self) -> StereoRig {
        StereoRig::horizontal(self.baseline)
    }

    pub fn generate(&self, n: usize, seed: u64) -> Vec<CalibrationRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rig = self.rig();
        let (th, tv) = ((self.fov_h_deg / 2.0).to_radians().tan(), (self.fov_v_deg / 2.0).to_radians().tan());
        (0..n)
            .map(|_| {
                let z = rng.random_range(self.depth.0..=self.depth.1);
                let p = Vector3::new(rng.random_range(-th..=th) * z, rng.random_range(-tv..=tv) * z, z);
                let (u, v) = rig.project(&p);
                let w = self.noise;
                let mut jitter = || Vector2::new(rng.random_range(-w..=w), rng.random_range(-w..=w));
                CalibrationRecord { u: u + jitter(), v: v + jitter(), p_true: p }
            })
            .collect()
    }
}
