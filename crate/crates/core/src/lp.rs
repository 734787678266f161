//! Small dense LP helpers over `{x : Ax ≤ b}`, backed by `microlp`.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::PolytopeError;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: DVector<f64> },
    Infeasible,
    Unbounded,
}

fn add_rows(p: &mut Problem, vars: &[microlp::Variable], a: &DMatrix<f64>, b: &DVector<f64>, skip: Option<usize>) {
    for i in 0..a.nrows() {
        if Some(i) == skip {
            continue;
        }
        let terms: Vec<_> = (0..a.ncols())
            .filter(|&j| a[(i, j)] != 0.0)
            .map(|j| (vars[j], a[(i, j)]))
            .collect();
        if terms.is_empty() {
            continue;
        }
        p.add_constraint(terms, ComparisonOp::Le, b[i]);
    }
}

fn run(p: &Problem, vars: &[microlp::Variable]) -> Result<LpOutcome, PolytopeError> {
    match p.solve() {
        Ok(out) => match out.solution() {
            Some(sol) => Ok(LpOutcome::Optimal {
                value: sol.objective(),
                x: DVector::from_iterator(vars.len(), vars.iter().map(|&v| sol.var_value_raw(v))),
            }),
            None => Err(PolytopeError::Lp("interrupted".into())),
        },
        Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
        Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
        Err(e) => Err(PolytopeError::Lp(e.to_string())),
    }
}

/// `max cᵀx` subject to `Ax ≤ b`, optionally ignoring row `skip`.
pub fn maximize_skip(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    skip: Option<usize>,
) -> Result<LpOutcome, PolytopeError> {
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..a.ncols())
        .map(|j| p.add_var(c[j], (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    add_rows(&mut p, &vars, a, b, skip);
    run(&p, &vars)
}

pub fn maximize(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<LpOutcome, PolytopeError> {
    maximize_skip(a, b, c, None)
}

/// Support value `max cᵀx`; `None` when the set is empty.
pub fn support(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<Option<f64>, PolytopeError> {
    match maximize(a, b, c)? {
        LpOutcome::Optimal { value, .. } => Ok(Some(value)),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(PolytopeError::NotAPolytope),
    }
}

/// Per-coordinate `[min, max]`; `None` when the set is empty.
pub fn interval_hull(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Option<Vec<(f64, f64)>>, PolytopeError> {
    let n = a.ncols();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        let hi = match support(a, b, &e)? {
            Some(v) => v,
            None => return Ok(None),
        };
        e[j] = -1.0;
        let lo = match support(a, b, &e)? {
            Some(v) => -v,
            None => return Ok(None),
        };
        out.push((lo.min(hi), hi.max(lo)));
    }
    Ok(Some(out))
}

/// Largest inscribed ball `max r` s.t. `a_iᵀx + r‖a_i‖ ≤ b_i`, with `r` free.
/// A negative radius means the set is empty.
pub fn inscribed_ball(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64), PolytopeError> {
    let n = a.ncols();
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..n)
        .map(|_| p.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let r = p.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for i in 0..a.nrows() {
        let norm = a.row(i).norm();
        let mut terms: Vec<_> = (0..n)
            .filter(|&j| a[(i, j)] != 0.0)
            .map(|j| (vars[j], a[(i, j)]))
            .collect();
        terms.push((r, norm));
        p.add_constraint(terms, ComparisonOp::Le, b[i]);
    }
    let mut all = vars.clone();
    all.push(r);
    match run(&p, &all)? {
        LpOutcome::Optimal { x, .. } => Ok((x.rows(0, n).into_owned(), x[n])),
        _ => Err(PolytopeError::NotAPolytope),
    }
}

/// Removes rows implied by the others, keeping the set unchanged up to `tol`.
///
/// Parallel duplicates collapse to the smallest offset first. Rows are assumed
/// unit-normalized and the set nonempty.
pub fn remove_redundant(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    tol: f64,
) -> Result<(DMatrix<f64>, DVector<f64>), PolytopeError> {
    let (a, b) = dedupe_parallel(a, b, 1e-12);
    let m = a.nrows();
    let mut keep = vec![true; m];
    for i in 0..m {
        let idx: Vec<usize> = (0..m).filter(|&k| keep[k] && k != i).collect();
        if idx.is_empty() {
            continue;
        }
        // Keep the row itself, relaxed by one unit, so the LP stays bounded.
        let mut rows: Vec<usize> = idx.clone();
        rows.push(i);
        let sub_a = a.select_rows(rows.iter());
        let mut sub_b = b.select_rows(rows.iter());
        let last = rows.len() - 1;
        sub_b[last] += 1.0;
        let c = a.row(i).transpose();
        if let LpOutcome::Optimal { value, .. } = maximize(&sub_a, &sub_b, &c)? {
            if value <= b[i] + tol * b[i].abs().max(1.0) {
                keep[i] = false;
            }
        }
    }
    let rows: Vec<usize> = (0..m).filter(|&k| keep[k]).collect();
    Ok((a.select_rows(rows.iter()), b.select_rows(rows.iter())))
}

/// Merges rows whose normals agree within `tol`, keeping the tightest offset.
pub fn dedupe_parallel(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> (DMatrix<f64>, DVector<f64>) {
    let m = a.nrows();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        a.row(i)
            .iter()
            .zip(a.row(j).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b[i].total_cmp(&b[j]))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let dup = kept
            .iter()
            .rev()
            .take(8)
            .any(|&k| (a.row(k) - a.row(i)).amax() <= tol && b[k] <= b[i]);
        if !dup {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    (a.select_rows(kept.iter()), b.select_rows(kept.iter()))
}
