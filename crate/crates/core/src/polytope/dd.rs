//! Double description on the homogenized cone of `{y : g_iᵀy ≤ 1}`.

use nalgebra::{DMatrix, DVector};

use crate::error::PolytopeError;

const EPS: f64 = 1e-9;

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }
    fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
    fn contains(&self, o: &Bits) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a & b == *b)
    }
}

struct Ray {
    v: DVector<f64>,
    zero: Bits,
}

/// Vertices of `{y : g_iᵀy ≤ 1}`; the origin must be interior.
pub(super) fn polar_vertices(g: &[DVector<f64>]) -> Result<Vec<DVector<f64>>, PolytopeError> {
    let n = g.first().map(|x| x.len()).ok_or(PolytopeError::NotAPolytope)?;
    let d = n + 1;
    let m = g.len() + 1;
    // Row i encodes t − g_iᵀy ≥ 0; the last row is t ≥ 0.
    let mut rows: Vec<DVector<f64>> = g
        .iter()
        .map(|gi| {
            let mut h = DVector::zeros(d);
            h[0] = 1.0;
            h.rows_mut(1, n).copy_from(&(-gi));
            h.normalize()
        })
        .collect();
    let mut t = DVector::zeros(d);
    t[0] = 1.0;
    rows.push(t);

    // Far constraints first: they are the likeliest to be facets, which keeps
    // the intermediate cones small when many rows end up redundant.
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&i, &j| g[j].norm().total_cmp(&g[i].norm()).then(i.cmp(&j)));
    order.push(m - 1);

    let mut basis: Vec<usize> = Vec::with_capacity(d);
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(d);
    for &i in &order {
        let mut r = rows[i].clone();
        for e in &q {
            r -= e * e.dot(&r);
        }
        let nr = r.norm();
        if nr > 1e-7 {
            q.push(r / nr);
            basis.push(i);
            if basis.len() == d {
                break;
            }
        }
    }
    if basis.len() < d {
        return Err(PolytopeError::NotAPolytope);
    }
    let m0 = DMatrix::from_rows(&basis.iter().map(|&i| rows[i].transpose()).collect::<Vec<_>>());
    let inv = m0.try_inverse().ok_or(PolytopeError::NotAPolytope)?;
    let mut rays: Vec<Ray> = (0..d)
        .map(|j| {
            let mut zero = Bits::new(m);
            for (k, &bi) in basis.iter().enumerate() {
                if k != j {
                    zero.set(bi);
                }
            }
            Ray { v: inv.column(j).normalize(), zero }
        })
        .collect();

    for &k in order.iter().filter(|i| !basis.contains(i)) {
        let h = &rows[k];
        let s: Vec<f64> = rays.iter().map(|r| h.dot(&r.v)).collect();
        if s.iter().all(|&x| x >= -EPS) {
            for (r, &x) in rays.iter_mut().zip(&s) {
                if x <= EPS {
                    r.zero.set(k);
                }
            }
            continue;
        }
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| s[i] > EPS).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| s[i] < -EPS).collect();
        let mut fresh = Vec::new();
        for &p in &pos {
            for &nn in &neg {
                let common = rays[p].zero.and(&rays[nn].zero);
                if (common.count() as usize) + 2 < d {
                    continue;
                }
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(i, r)| i == p || i == nn || !r.zero.contains(&common));
                if !adjacent {
                    continue;
                }
                let v = (&rays[nn].v * s[p] - &rays[p].v * s[nn]).normalize();
                let mut zero = common;
                zero.set(k);
                fresh.push(Ray { v, zero });
            }
        }
        let mut next: Vec<Ray> = Vec::with_capacity(rays.len() + fresh.len());
        for (i, mut r) in rays.into_iter().enumerate() {
            if s[i] >= -EPS {
                if s[i] <= EPS {
                    r.zero.set(k);
                }
                next.push(r);
            }
        }
        next.extend(fresh);
        rays = next;
    }

    let mut out = Vec::with_capacity(rays.len());
    for r in rays {
        if r.v[0] <= EPS {
            return Err(PolytopeError::NotAPolytope);
        }
        out.push(r.v.rows(1, n) / r.v[0]);
    }
    Ok(out)
}

/// Vertices of `{x : Ax ≤ b}` by solving every `n`-subset of rows. Only used
/// for thin sets where the polar route is ill-conditioned.
pub(super) fn brute_force_vertices(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Vec<DVector<f64>> {
    let (m, n) = a.shape();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    if m < n {
        return out;
    }
    loop {
        let sub = a.select_rows(idx.iter());
        let rhs = b.select_rows(idx.iter());
        let lu = sub.clone().lu();
        if let Some(x) = lu.solve(&rhs) {
            let sv = sub.svd(false, false).singular_values;
            if sv.min() > 1e-9 * sv.max().max(1e-300) && (a * &x - b).max() <= tol {
                out.push(x);
            }
        }
        // next combination
        let mut i = n;
        while i > 0 && idx[i - 1] == m - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}
