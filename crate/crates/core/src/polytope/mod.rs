//! Polytope calculus in H- and V-representation.

mod dd;
mod fm;
mod miniball;
mod sample;
mod template;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::PolytopeError;
use crate::lp;

pub use fm::project;
pub use miniball::chebyshev_ball;
pub use sample::{sample_uniform, HitAndRun};
pub use template::{enclose_ellipsoid, template_normals, TemplateKind};

/// Slack below which the inscribed-ball LP declares a set empty.
pub const EMPTY_TOL: f64 = 1e-9;

/// Either a set or the explicit empty-set marker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enclosure<T> {
    Set(T),
    Empty,
}

impl<T> Enclosure<T> {
    pub fn is_empty(&self) -> bool {
        matches!(self, Enclosure::Empty)
    }

    pub fn set(self) -> Option<T> {
        match self {
            Enclosure::Set(t) => Some(t),
            Enclosure::Empty => None,
        }
    }

    pub fn as_set(&self) -> Option<&T> {
        match self {
            Enclosure::Set(t) => Some(t),
            Enclosure::Empty => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Enclosure<U> {
        match self {
            Enclosure::Set(t) => Enclosure::Set(f(t)),
            Enclosure::Empty => Enclosure::Empty,
        }
    }
}

/// `{x : Ax ≤ b}` with unit-norm rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HRepJson", into = "HRepJson")]
pub struct HPolytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct HRepJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl TryFrom<HRepJson> for HPolytope {
    type Error = PolytopeError;
    fn try_from(j: HRepJson) -> Result<Self, PolytopeError> {
        let n = j.a.first().map_or(0, Vec::len);
        if n == 0 || j.a.iter().any(|r| r.len() != n) {
            return Err(PolytopeError::Invalid("ragged or empty A".into()));
        }
        if j.a.len() != j.b.len() {
            return Err(PolytopeError::DimensionMismatch { expected: j.a.len(), found: j.b.len() });
        }
        let a = DMatrix::from_fn(j.a.len(), n, |i, k| j.a[i][k]);
        HPolytope::new(a, DVector::from_vec(j.b))
    }
}

impl From<HPolytope> for HRepJson {
    fn from(p: HPolytope) -> Self {
        HRepJson {
            a: p.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: p.b.iter().copied().collect(),
        }
    }
}

impl HPolytope {
    /// Normalizes every row to unit length. Zero rows are dropped when
    /// trivially satisfied and rejected otherwise.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, PolytopeError> {
        if a.nrows() != b.len() {
            return Err(PolytopeError::DimensionMismatch { expected: a.nrows(), found: b.len() });
        }
        if a.ncols() == 0 {
            return Err(PolytopeError::Invalid("zero-dimensional".into()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(PolytopeError::Invalid("non-finite entry".into()));
        }
        let mut rows = Vec::new();
        let mut offs = Vec::new();
        for i in 0..a.nrows() {
            let norm = a.row(i).norm();
            if norm <= 1e-300 {
                if b[i] < 0.0 {
                    return Err(PolytopeError::Invalid(format!("row {i} reads 0 <= {}", b[i])));
                }
                continue;
            }
            if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
                rows.push(a.row(i).into_owned());
                offs.push(b[i]);
            } else {
                rows.push(a.row(i) / norm);
                offs.push(b[i] / norm);
            }
        }
        if rows.is_empty() {
            return Err(PolytopeError::NotAPolytope);
        }
        Ok(HPolytope {
            a: DMatrix::from_rows(&rows),
            b: DVector::from_vec(offs),
        })
    }

    /// Wraps data whose rows are already unit-normalized.
    pub fn from_normalized(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        debug_assert!((0..a.nrows()).all(|i| (a.row(i).norm() - 1.0).abs() < 1e-9));
        HPolytope { a, b }
    }

    /// Axis-aligned box `lo ≤ x ≤ hi`.
    pub fn from_box(lo: &DVector<f64>, hi: &DVector<f64>) -> Self {
        let n = lo.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        HPolytope { a, b }
    }

    /// The singleton `{p}` as a zero-width box.
    pub fn point(p: &DVector<f64>) -> Self {
        Self::from_box(p, p)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        contains(self, x, tol)
    }

    /// Largest violation `max_i (a_iᵀx − b_i)`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).max()
    }

    /// `max aᵀx` over the set, `None` if empty.
    pub fn support(&self, dir: &DVector<f64>) -> Result<Option<f64>, PolytopeError> {
        lp::support(&self.a, &self.b, dir)
    }

    pub fn interval_hull(&self) -> Result<Option<Vec<(f64, f64)>>, PolytopeError> {
        lp::interval_hull(&self.a, &self.b)
    }

    /// Largest inscribed ball; negative radius means empty.
    pub fn inscribed_ball(&self) -> Result<Ball, PolytopeError> {
        let (center, radius) = lp::inscribed_ball(&self.a, &self.b)?;
        Ok(Ball { center, radius })
    }

    pub fn is_empty(&self) -> Result<bool, PolytopeError> {
        Ok(self.inscribed_ball()?.radius < -EMPTY_TOL * self.scale())
    }

    /// Magnitude used to make absolute tolerances relative.
    pub fn scale(&self) -> f64 {
        self.b.amax().max(1.0)
    }

    /// Drops rows implied by the others.
    pub fn remove_redundant(&self) -> Result<HPolytope, PolytopeError> {
        let (a, b) = lp::remove_redundant(&self.a, &self.b, 1e-9)?;
        Ok(HPolytope { a, b })
    }

    /// Stacks the rows of `other` under those of `self`.
    pub fn stack(&self, other: &HPolytope) -> Result<HPolytope, PolytopeError> {
        if self.dim() != other.dim() {
            return Err(PolytopeError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let m = self.n_rows();
        let a = DMatrix::from_fn(m + other.n_rows(), self.dim(), |i, j| {
            if i < m { self.a[(i, j)] } else { other.a[(i - m, j)] }
        });
        let b = DVector::from_fn(m + other.n_rows(), |i, _| if i < m { self.b[i] } else { other.b[i - m] });
        Ok(HPolytope { a, b })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite polytope serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, PolytopeError> {
        serde_json::from_str(s).map_err(|e| PolytopeError::Invalid(e.to_string()))
    }
}

/// Convex hull of a vertex list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VRepJson", into = "VRepJson")]
pub struct VPolytope {
    vertices: Vec<DVector<f64>>,
}

#[derive(Serialize, Deserialize)]
struct VRepJson {
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
}

impl TryFrom<VRepJson> for VPolytope {
    type Error = PolytopeError;
    fn try_from(j: VRepJson) -> Result<Self, PolytopeError> {
        VPolytope::new(j.v.into_iter().map(DVector::from_vec).collect())
    }
}

impl From<VPolytope> for VRepJson {
    fn from(p: VPolytope) -> Self {
        VRepJson { v: p.vertices.iter().map(|v| v.iter().copied().collect()).collect() }
    }
}

impl VPolytope {
    pub fn new(vertices: Vec<DVector<f64>>) -> Result<Self, PolytopeError> {
        let n = vertices.first().map(|v| v.len()).ok_or(PolytopeError::EmptySet)?;
        if n == 0 {
            return Err(PolytopeError::Invalid("zero-dimensional".into()));
        }
        for v in &vertices {
            if v.len() != n {
                return Err(PolytopeError::DimensionMismatch { expected: n, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(PolytopeError::Invalid("non-finite vertex".into()));
            }
        }
        Ok(VPolytope { vertices })
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn support(&self, dir: &DVector<f64>) -> f64 {
        self.vertices.iter().map(|v| v.dot(dir)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite polytope serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, PolytopeError> {
        serde_json::from_str(s).map_err(|e| PolytopeError::Invalid(e.to_string()))
    }
}

/// `{p : (p−c)ᵀ Σ⁻¹ (p−c) ≤ C²}`, read through its support function so that
/// singular `Σ` is allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: DVector<f64>,
    pub radius: f64,
}

pub fn contains(p: &HPolytope, x: &DVector<f64>, tol: f64) -> bool {
    (0..p.a.nrows()).all(|i| p.a.row(i).dot(&x.transpose()) <= p.b[i] + tol)
}

/// H- to V-representation.
pub fn vertex_enum(p: &HPolytope) -> Result<VPolytope, PolytopeError> {
    let n = p.dim();
    let ball = p.inscribed_ball()?;
    let scale = p.scale();
    if ball.radius < -EMPTY_TOL * scale {
        return Err(PolytopeError::EmptySet);
    }
    if ball.radius > 1e-7 * scale {
        let x0 = &ball.center;
        let slack = &p.b - &p.a * x0;
        let g: Vec<DVector<f64>> = (0..p.n_rows())
            .map(|i| p.a.row(i).transpose() / slack[i])
            .collect();
        let ys = dd::polar_vertices(&g)?;
        let verts = ys.into_iter().map(|y| x0 + y).collect();
        return VPolytope::new(dedupe_points(verts, 1e-9 * scale));
    }
    // Too thin for the polar route: enumerate bases directly.
    if p.interval_hull()?.is_none() {
        return Err(PolytopeError::EmptySet);
    }
    let verts = dd::brute_force_vertices(&p.a, &p.b, 1e-9 * scale);
    if verts.is_empty() || n == 0 {
        return Err(PolytopeError::EmptySet);
    }
    VPolytope::new(dedupe_points(verts, 1e-9 * scale))
}

/// V- to H-representation; needs an `n`-dimensional hull.
pub fn facet_enum(v: &VPolytope) -> Result<HPolytope, PolytopeError> {
    let n = v.dim();
    let pts = v.vertices();
    if pts.len() < n + 1 {
        return Err(PolytopeError::DegenerateHull);
    }
    let c = pts.iter().fold(DVector::zeros(n), |acc, p| acc + p) / pts.len() as f64;
    let w: Vec<DVector<f64>> = pts.iter().map(|p| p - &c).collect();
    let s = w.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if s == 0.0 {
        return Err(PolytopeError::DegenerateHull);
    }
    let wm = DMatrix::from_columns(&w) / s;
    let sv = wm.clone().svd(false, false).singular_values;
    if sv.min() <= 1e-9 * sv.max() {
        return Err(PolytopeError::DegenerateHull);
    }
    let g: Vec<DVector<f64>> = wm.column_iter().map(|c| c.into_owned()).collect();
    let us = dd::polar_vertices(&g).map_err(|_| PolytopeError::DegenerateHull)?;
    let mut rows = Vec::with_capacity(us.len());
    let mut offs = Vec::with_capacity(us.len());
    for u in us {
        let nu = u.norm();
        rows.push((&u / nu).transpose());
        offs.push((s + u.dot(&c)) / nu);
    }
    let a = DMatrix::from_rows(&rows);
    let (a, b) = lp::dedupe_parallel(&a, &DVector::from_vec(offs), 1e-10);
    Ok(HPolytope { a, b })
}

/// Largest pairwise vertex distance.
pub fn diameter(v: &VPolytope) -> f64 {
    let pts = v.vertices();
    let mut best = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.max((&pts[i] - &pts[j]).norm());
        }
    }
    best
}

/// `H P + q` for square invertible `H`, on the H-representation.
pub fn affine_map_h(p: &HPolytope, h: &DMatrix<f64>, q: &DVector<f64>) -> Result<HPolytope, PolytopeError> {
    let n = p.dim();
    if h.nrows() != n || h.ncols() != n || q.len() != n {
        return Err(PolytopeError::DimensionMismatch { expected: n, found: h.nrows() });
    }
    let hinv = h
        .clone()
        .try_inverse()
        .ok_or_else(|| PolytopeError::Invalid("singular map".into()))?;
    let a = &p.a * &hinv;
    let b = &p.b + &a * q;
    HPolytope::new(a, b)
}

/// `H P + q` on the vertices.
pub fn affine_map_v(v: &VPolytope, h: &DMatrix<f64>, q: &DVector<f64>) -> Result<VPolytope, PolytopeError> {
    if h.ncols() != v.dim() || h.nrows() != q.len() {
        return Err(PolytopeError::DimensionMismatch { expected: v.dim(), found: h.ncols() });
    }
    VPolytope::new(v.vertices().iter().map(|x| h * x + q).collect())
}

/// Exact Minkowski sum through the hull of pairwise vertex sums.
pub fn minkowski_sum(p1: &VPolytope, p2: &VPolytope) -> Result<HPolytope, PolytopeError> {
    if p1.dim() != p2.dim() {
        return Err(PolytopeError::DimensionMismatch { expected: p1.dim(), found: p2.dim() });
    }
    let mut sums = Vec::with_capacity(p1.vertices().len() * p2.vertices().len());
    for x in p1.vertices() {
        for y in p2.vertices() {
            sums.push(x + y);
        }
    }
    let scale = sums.iter().map(|s| s.amax()).fold(1.0, f64::max);
    facet_enum(&VPolytope::new(dedupe_points(sums, 1e-12 * scale))?)
}

/// Minkowski sum of two V-polytopes as a vertex list (not reduced).
pub fn minkowski_sum_points(p1: &VPolytope, p2: &VPolytope) -> Vec<DVector<f64>> {
    p1.vertices()
        .iter()
        .flat_map(|x| p2.vertices().iter().map(move |y| x + y))
        .collect()
}

/// Stacked rows with redundancy removed, or the empty marker.
pub fn intersect(p1: &HPolytope, p2: &HPolytope) -> Result<Enclosure<HPolytope>, PolytopeError> {
    let stacked = p1.stack(p2)?;
    if stacked.is_empty()? {
        return Ok(Enclosure::Empty);
    }
    Ok(Enclosure::Set(stacked.remove_redundant()?))
}

/// `P + B(0, ε)` enclosed by shifting every offset by `ε`.
pub fn inflate(p: &HPolytope, eps: f64) -> Result<HPolytope, PolytopeError> {
    if !(eps >= 0.0) {
        return Err(PolytopeError::NegativeInflation(eps));
    }
    Ok(HPolytope { a: p.a.clone(), b: p.b.add_scalar(eps) })
}

pub(crate) fn dedupe_points(pts: Vec<DVector<f64>>, tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(pts.len());
    for p in pts {
        if !out.iter().any(|q| (q - &p).amax() <= tol) {
            out.push(p);
        }
    }
    out
}

