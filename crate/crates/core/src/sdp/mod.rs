//! Semidefinite relaxations and a certified-bound solver contract.
//!
//! Problems are stated over a symmetric `X ⪰ 0` whose bottom-right entry is
//! pinned to one. A solver returns a status and a dual bound that is a true
//! bound on the relaxation, not an estimate.

mod ipm;
mod relax;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ipm::InteriorPoint;
pub use relax::{
    build_compound_sdp, build_forward_sdp, build_rotation_orthogonality_blocks, build_rotball_sdp,
    CompoundRelaxation, ForwardRelaxation, RotballRelaxation,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no certified bound: solver status {0:?}")]
    NotSolved(SdpStatus),
    #[error("bound sense mismatch: result is a {0:?} bound")]
    WrongSense(Sense),
    #[error("invalid problem data: {0}")]
    Invalid(String),
    #[error("coordinate bounds unavailable: {0}")]
    Bounds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Symmetric matrix kept as upper-triangular triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` to entry `(i, j)` and, by symmetry, to `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n, "index out of range");
        if v == 0.0 {
            return;
        }
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        match self.entries.iter_mut().find(|e| e.0 == r && e.1 == c) {
            Some(e) => e.2 += v,
            None => self.entries.push((r, c, v)),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.entries
            .iter()
            .filter(|e| e.0 == r && e.1 == c)
            .map(|e| e.2)
            .sum()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        m
    }

    /// Exact symmetric part of `m` above the diagonal; `m` must be symmetric
    /// within `tol`.
    pub fn from_dense(m: &DMatrix<f64>, tol: f64) -> Result<Self, SdpError> {
        if m.nrows() != m.ncols() {
            return Err(SdpError::DimensionMismatch("matrix not square".into()));
        }
        let n = m.nrows();
        let mut s = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                if !m[(i, j)].is_finite() {
                    return Err(SdpError::Invalid("non-finite entry".into()));
                }
                if (m[(i, j)] - m[(j, i)]).abs() > tol {
                    return Err(SdpError::Invalid(format!("asymmetric at ({i},{j})")));
                }
                s.add(i, j, m[(i, j)]);
            }
        }
        Ok(s)
    }

    /// `yᵀ M y`.
    pub fn quad(&self, y: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * y[i] * y[i] } else { 2.0 * v * y[i] * y[j] })
            .sum()
    }

    /// `⟨M, X⟩ = tr(M X)`.
    pub fn inner(&self, x: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * x[(i, j)] } else { v * (x[(i, j)] + x[(j, i)]) })
            .sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    /// Embeds `self` at offset `at` of a larger matrix of side `n`.
    pub fn embed(&self, n: usize, at: usize) -> SymMatrix {
        let mut s = SymMatrix::zeros(n);
        for &(i, j, v) in &self.entries {
            s.add(i + at, j + at, v);
        }
        s
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = SdpError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, SdpError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(SdpError::DimensionMismatch("matrix not square".into()));
        }
        SymMatrix::from_dense(&DMatrix::from_fn(n, n, |i, j| rows[i][j]), 1e-12)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(s: SymMatrix) -> Self {
        let d = s.to_dense();
        d.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equality {
    pub matrix: SymMatrix,
    pub rhs: f64,
}

/// `opt ⟨C, X⟩` s.t. equalities, `⟨F_i, X⟩ ≤ 0`, `X_aa = 1`, `X ⪰ 0`.
///
/// `coordinate_bounds[k]` is an interval known to hold for `y_k` at every
/// rank-one feasible point `X = yyᵀ`. When present the solver adds the
/// implied cuts `(y_k − l_k)(u_k − y_k) ≥ 0` in lifted form, which bound the
/// trace and make the dual bound rigorous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub dim: usize,
    pub sense: Sense,
    pub objective: SymMatrix,
    pub equalities: Vec<Equality>,
    pub inequalities: Vec<SymMatrix>,
    pub anchor: usize,
    /// Extra valid equalities; empty for the plain relaxations.
    #[serde(default)]
    pub redundant: Vec<Equality>,
    #[serde(default)]
    pub coordinate_bounds: Option<Vec<(f64, f64)>>,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<(), SdpError> {
        let n = self.dim;
        if n == 0 || self.anchor != n - 1 {
            return Err(SdpError::DimensionMismatch("anchor must be the last index".into()));
        }
        let mats = std::iter::once(&self.objective)
            .chain(self.equalities.iter().map(|e| &e.matrix))
            .chain(self.redundant.iter().map(|e| &e.matrix))
            .chain(self.inequalities.iter());
        for m in mats {
            if m.dim() != n {
                return Err(SdpError::DimensionMismatch(format!("matrix of side {} in problem of side {n}", m.dim())));
            }
            if m.entries.iter().any(|e| !e.2.is_finite()) {
                return Err(SdpError::Invalid("non-finite entry".into()));
            }
        }
        if let Some(b) = &self.coordinate_bounds {
            if b.len() != n - 1 {
                return Err(SdpError::DimensionMismatch("one bound per non-anchor coordinate".into()));
            }
            if b.iter().any(|&(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
                return Err(SdpError::Invalid("bad coordinate bound".into()));
            }
        }
        Ok(())
    }

    /// Objective of the lifted point `y yᵀ`.
    pub fn objective_at(&self, y: &[f64]) -> f64 {
        self.objective.quad(y)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite problem serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SdpError> {
        let p: SdpProblem = serde_json::from_str(s).map_err(|e| SdpError::Invalid(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// `dual_bound` bounds the relaxation optimum from above for
/// [`Sense::Maximize`] and from below for [`Sense::Minimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpResult {
    pub sense: Sense,
    pub primal_value: f64,
    pub dual_bound: f64,
    pub status: SdpStatus,
    pub iterations: usize,
}

/// Anything that turns a problem into a status-tagged result.
pub trait SdpSolver {
    fn solve(&self, p: &SdpProblem) -> SdpResult;
}

/// Solves with the default interior-point method.
pub fn solve(p: &SdpProblem) -> SdpResult {
    InteriorPoint::default().solve(p)
}

pub fn default_inflation(dual_bound: f64) -> f64 {
    1e-6 * dual_bound.abs().max(1.0)
}

fn usable(r: &SdpResult) -> Result<(), SdpError> {
    match r.status {
        SdpStatus::Optimal | SdpStatus::NearOptimal if r.dual_bound.is_finite() => Ok(()),
        s => Err(SdpError::NotSolved(s)),
    }
}

/// `dual_bound + inflation`, defaulting to `1e-6·max(1, |dual_bound|)`.
pub fn certified_upper_bound(r: &SdpResult, inflation: Option<f64>) -> Result<f64, SdpError> {
    usable(r)?;
    if r.sense != Sense::Maximize {
        return Err(SdpError::WrongSense(r.sense));
    }
    Ok(r.dual_bound + inflation.unwrap_or_else(|| default_inflation(r.dual_bound)))
}

/// `dual_bound − inflation` for minimization results.
pub fn certified_lower_bound(r: &SdpResult, inflation: Option<f64>) -> Result<f64, SdpError> {
    usable(r)?;
    if r.sense != Sense::Minimize {
        return Err(SdpError::WrongSense(r.sense));
    }
    Ok(r.dual_bound - inflation.unwrap_or_else(|| default_inflation(r.dual_bound)))
}

