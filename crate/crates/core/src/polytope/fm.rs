//! Fourier–Motzkin projection with LP pruning after every step.

use nalgebra::{DMatrix, DVector};

use super::HPolytope;
use crate::error::PolytopeError;
use crate::lp;

const COEF_EPS: f64 = 1e-12;

/// Shadow of `p` on the coordinates `keep`, in the order given.
pub fn project(p: &HPolytope, keep: &[usize]) -> Result<HPolytope, PolytopeError> {
    let n = p.dim();
    if keep.is_empty() || keep.iter().any(|&k| k >= n) {
        return Err(PolytopeError::Invalid("bad coordinate selection".into()));
    }
    if p.is_empty()? {
        return Err(PolytopeError::EmptySet);
    }
    // columns currently present, by original index
    let mut cols: Vec<usize> = (0..n).collect();
    let mut a = p.a().clone();
    let mut b = p.b().clone();
    let scale = p.scale();
    loop {
        let elim: Vec<usize> = (0..cols.len()).filter(|&c| !keep.contains(&cols[c])).collect();
        if elim.is_empty() {
            break;
        }
        // greedy: smallest number of generated rows
        let j = *elim
            .iter()
            .min_by_key(|&&c| {
                let pos = (0..a.nrows()).filter(|&i| a[(i, c)] > COEF_EPS).count();
                let neg = (0..a.nrows()).filter(|&i| a[(i, c)] < -COEF_EPS).count();
                (pos * neg) as isize - (pos + neg) as isize
            })
            .expect("nonempty");
        let (na, nb) = eliminate(&a, &b, j, scale)?;
        cols.remove(j);
        if na.nrows() == 0 {
            // nothing constrains the rest: unbounded shadow
            return Err(PolytopeError::NotAPolytope);
        }
        let (ra, rb) = lp::remove_redundant(&na, &nb, 1e-9)?;
        a = ra;
        b = rb;
    }
    let perm: Vec<usize> = keep
        .iter()
        .map(|k| cols.iter().position(|c| c == k).expect("kept column present"))
        .collect();
    let a = DMatrix::from_fn(a.nrows(), keep.len(), |i, j| a[(i, perm[j])]);
    Ok(HPolytope::from_normalized(a, b))
}

fn eliminate(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    j: usize,
    scale: f64,
) -> Result<(DMatrix<f64>, DVector<f64>), PolytopeError> {
    let m = a.nrows();
    let n = a.ncols();
    let (mut pos, mut neg, mut zero) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..m {
        let c = a[(i, j)];
        if c > COEF_EPS {
            pos.push(i);
        } else if c < -COEF_EPS {
            neg.push(i);
        } else {
            zero.push(i);
        }
    }
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut offs: Vec<f64> = Vec::new();
    let drop_col = |v: DVector<f64>| v.remove_row(j);
    for &i in &zero {
        rows.push(drop_col(a.row(i).transpose()));
        offs.push(b[i]);
    }
    for &p in &pos {
        for &q in &neg {
            let (cp, cq) = (a[(p, j)], -a[(q, j)]);
            let row = a.row(p).transpose() * cq + a.row(q).transpose() * cp;
            let off = b[p] * cq + b[q] * cp;
            rows.push(drop_col(row));
            offs.push(off);
        }
    }
    let mut ra = Vec::with_capacity(rows.len());
    let mut rb = Vec::with_capacity(rows.len());
    for (r, o) in rows.into_iter().zip(offs) {
        let nr = r.norm();
        if nr <= 1e-12 {
            if o < -1e-9 * scale {
                return Err(PolytopeError::EmptySet);
            }
            continue;
        }
        ra.push((r / nr).transpose());
        rb.push(o / nr);
    }
    if ra.is_empty() {
        return Ok((DMatrix::zeros(0, n - 1), DVector::zeros(0)));
    }
    let (da, db) = lp::dedupe_parallel(&DMatrix::from_rows(&ra), &DVector::from_vec(rb), 1e-12);
    Ok((da, db))
}
