//! Dense infeasible primal-dual path following (HKM direction, Mehrotra
//! predictor-corrector) for one PSD block plus nonnegative slacks.
//!
//! Before iterating, every coordinate with a known interval is shifted and
//! scaled onto `[-1, 1]` by a congruence, and coordinates whose interval has
//! zero width are substituted out. Both steps map rank-one feasible points to
//! rank-one feasible points, so the relaxation bound is unaffected.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::{Sense, SdpProblem, SdpResult, SdpSolver, SdpStatus, SymMatrix};

type Triplets = Vec<(usize, usize, f64)>;

#[derive(Debug, Clone)]
pub struct InteriorPoint {
    pub max_iter: usize,
    pub tol: f64,
    pub step_fraction: f64,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        InteriorPoint { max_iter: 100, tol: 1e-9, step_fraction: 0.98 }
    }
}

struct Con {
    ent: Triplets,
    rhs: f64,
}

impl Con {
    fn inner(&self, x: &DMatrix<f64>) -> f64 {
        self.ent
            .iter()
            .map(|&(i, j, v)| if i == j { v * x[(i, j)] } else { v * (x[(i, j)] + x[(j, i)]) })
            .sum()
    }

    fn axpy(&self, alpha: f64, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.ent {
            out[(i, j)] += alpha * v;
            if i != j {
                out[(j, i)] += alpha * v;
            }
        }
    }
}

/// The scaled, reduced problem `min ⟨C, X⟩` in internal form.
struct Reduced {
    n: usize,
    c: DMatrix<f64>,
    eq: Vec<Con>,
    ineq: Vec<Con>,
    trace_bound: Option<f64>,
    /// Original objective is `c_scale · (−⟨C, X⟩)` in maximization form.
    c_scale: f64,
}

enum Prepared {
    Problem(Reduced),
    /// Nothing left to optimize over; value of the maximization form.
    Constant(f64),
    Infeasible,
}

fn to_triplets(m: &DMatrix<f64>) -> Triplets {
    let n = m.nrows();
    let cutoff = 1e-15 * m.amax();
    let mut t = Vec::new();
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            if v.abs() > cutoff && v != 0.0 {
                t.push((i, j, v));
            }
        }
    }
    t
}

fn prepare(p: &SdpProblem) -> Prepared {
    let n = p.dim;
    let a = n - 1;
    // Congruence y = T y' with the anchor kept last.
    let (t, trace_bound) = match &p.coordinate_bounds {
        None => (DMatrix::identity(n, n), None),
        Some(bounds) => {
            let mut cols: Vec<(usize, f64)> = Vec::new();
            let mut mids = vec![0.0; n];
            for (k, &(l, u)) in bounds.iter().enumerate() {
                let m = 0.5 * (l + u);
                let w = 0.5 * (u - l);
                mids[k] = m;
                if w > 1e-12 * m.abs().max(1.0) {
                    let pad = 1e-9 * l.abs().max(u.abs()).max(1.0);
                    cols.push((k, w + pad));
                }
            }
            let np = cols.len() + 1;
            let mut t = DMatrix::zeros(n, np);
            for (j, &(k, h)) in cols.iter().enumerate() {
                t[(k, j)] = h;
            }
            for k in 0..a {
                t[(k, np - 1)] = mids[k];
            }
            t[(a, np - 1)] = 1.0;
            (t, Some(np as f64))
        }
    };
    let np = t.ncols();
    let ap = np - 1;
    let tnorm2 = t.norm_squared().max(1.0);
    let xf = |s: &SymMatrix| -> DMatrix<f64> { t.transpose() * s.to_dense() * &t };

    let mut eq: Vec<Con> = vec![Con { ent: vec![(ap, ap, 1.0)], rhs: 1.0 }];
    let mut ineq: Vec<Con> = Vec::new();
    // Constant-only rows are checked and dropped; returns false if violated.
    let mut push = |m: DMatrix<f64>, rhs: f64, orig: f64, is_eq: bool| -> bool {
        let mut rest = m.clone();
        rest[(ap, ap)] = 0.0;
        let rest_norm = rest.norm();
        if rest_norm <= 1e-14 * orig.max(1e-300) * tnorm2 {
            let lhs = m[(ap, ap)];
            let tol = 1e-8 * (1.0 + rhs.abs() + orig);
            return if is_eq { (lhs - rhs).abs() <= tol } else { lhs <= rhs + tol };
        }
        let norm = m.norm();
        let con = Con { ent: to_triplets(&(m / norm)), rhs: rhs / norm };
        if is_eq { eq.push(con) } else { ineq.push(con) }
        true
    };

    for e in p.equalities.iter().chain(&p.redundant) {
        if !push(xf(&e.matrix), e.rhs, e.matrix.frobenius(), true) {
            return Prepared::Infeasible;
        }
    }
    for f in &p.inequalities {
        if !push(xf(f), 0.0, f.frobenius(), false) {
            return Prepared::Infeasible;
        }
    }
    if trace_bound.is_some() {
        for j in 0..ap {
            ineq.push(Con { ent: vec![(j, j, 1.0)], rhs: 1.0 });
        }
    }
    drop_dependent(&mut eq, np);

    let obj = match p.sense {
        Sense::Maximize => xf(&p.objective),
        Sense::Minimize => -xf(&p.objective),
    };
    if np == 1 {
        return Prepared::Constant(obj[(0, 0)]);
    }
    let c_scale = obj.norm();
    if c_scale == 0.0 {
        return Prepared::Constant(0.0);
    }
    let c = -(obj / c_scale);
    Prepared::Problem(Reduced { n: np, c, eq, ineq, trace_bound, c_scale })
}

/// Gram–Schmidt on the svec images; dependent equalities are dropped, which
/// can only loosen the relaxation.
fn drop_dependent(eq: &mut Vec<Con>, n: usize) {
    let svec = |c: &Con| -> DVector<f64> {
        let mut v = DVector::zeros(n * (n + 1) / 2);
        for &(i, j, x) in &c.ent {
            let idx = j * (j + 1) / 2 + i;
            v[idx] = if i == j { x } else { x * std::f64::consts::SQRT_2 };
        }
        v
    };
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = vec![false; eq.len()];
    for (k, c) in eq.iter().enumerate() {
        let mut r = svec(c);
        let n0 = r.norm();
        for b in &basis {
            r -= b * b.dot(&r);
        }
        let nr = r.norm();
        if nr > 1e-9 * n0 {
            basis.push(r / nr);
            keep[k] = true;
        }
    }
    let mut k = 0;
    eq.retain(|_| {
        k += 1;
        keep[k - 1]
    });
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn lambda_min(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym(m.clone())).eigenvalues.min()
}

/// Largest `α` with `X + αΔX ⪰ 0`.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else { return 0.0 };
    let l = ch.l();
    let Some(a) = l.solve_lower_triangular(dx) else { return 0.0 };
    let Some(b) = l.solve_lower_triangular(&a.transpose()) else { return 0.0 };
    let lam = lambda_min(&b);
    if lam >= 0.0 { f64::INFINITY } else { -1.0 / lam }
}

fn ratio_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

impl Reduced {
    fn m(&self) -> usize {
        self.eq.len() + self.ineq.len()
    }

    fn con(&self, i: usize) -> &Con {
        if i < self.eq.len() { &self.eq[i] } else { &self.ineq[i - self.eq.len()] }
    }

    fn op(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_fn(self.m(), |i, _| self.con(i).inner(x))
    }

    fn adj(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for i in 0..self.m() {
            self.con(i).axpy(y[i], &mut out);
        }
        out
    }

    fn rhs(&self) -> DVector<f64> {
        DVector::from_fn(self.m(), |i, _| self.con(i).rhs)
    }

    /// `M_ij = tr(A_i X A_j Z⁻¹)`.
    fn schur(&self, x: &DMatrix<f64>, zinv: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.m();
        let n = self.n;
        let mut out = DMatrix::zeros(m, m);
        let mut w = DMatrix::zeros(n, n);
        for j in 0..m {
            w.fill(0.0);
            for &(p, q, v) in &self.con(j).ent {
                w.ger(v, &x.column(p), &zinv.row(q).transpose(), 1.0);
                if p != q {
                    w.ger(v, &x.column(q), &zinv.row(p).transpose(), 1.0);
                }
            }
            for i in 0..m {
                out[(i, j)] = self
                    .con(i)
                    .ent
                    .iter()
                    .map(|&(r, s, v)| if r == s { v * w[(s, r)] } else { v * (w[(s, r)] + w[(r, s)]) })
                    .sum();
            }
        }
        sym(out)
    }

    /// Rigorous lower bound on `min ⟨C, X⟩` from any multiplier vector.
    fn certified(&self, y: &DVector<f64>) -> f64 {
        let me = self.eq.len();
        let mut yc = y.clone();
        for i in me..yc.len() {
            yc[i] = yc[i].min(0.0);
        }
        let z = &self.c - self.adj(&yc);
        let lam = lambda_min(&z) - 1e-13 * (1.0 + z.norm());
        let base = self.rhs().dot(&yc);
        if lam >= 0.0 {
            return base;
        }
        match self.trace_bound {
            Some(b) => base + lam * b,
            None => f64::NEG_INFINITY,
        }
    }
}

struct Outcome {
    pobj: f64,
    best: f64,
    status: SdpStatus,
    iterations: usize,
}

impl InteriorPoint {
    fn run(&self, r: &Reduced) -> Outcome {
        let n = r.n;
        let me = r.eq.len();
        let mi = r.ineq.len();
        let m = me + mi;
        let b = r.rhs();
        let nu = (n + mi) as f64;
        let mut x = DMatrix::<f64>::identity(n, n);
        let mut z = DMatrix::<f64>::identity(n, n);
        let mut xs = DVector::from_element(mi, 1.0);
        let mut zs = DVector::from_element(mi, 1.0);
        let mut y = DVector::zeros(m);
        let mut best = f64::NEG_INFINITY;
        let mut pobj = f64::NAN;
        let bnorm = 1.0 + b.norm();
        let cnorm = 1.0 + r.c.norm();
        let mut status = SdpStatus::NumericalFailure;
        let mut it = 0;
        let mut stalls = 0;
        while it < self.max_iter {
            it += 1;
            let Some(zch) = Cholesky::new(z.clone()) else { break };
            let zinv = zch.inverse();
            let ax = r.op(&x);
            let mut rp = &b - &ax;
            for k in 0..mi {
                rp[me + k] -= xs[k];
            }
            let rd = &r.c - r.adj(&y) - &z;
            let rdl = DVector::from_fn(mi, |k, _| -y[me + k] - zs[k]);
            let mu = (x.dot(&z) + xs.dot(&zs)) / nu;
            pobj = x.dot(&r.c);
            let dobj = b.dot(&y);
            best = best.max(r.certified(&y));
            let pinf = rp.norm() / bnorm;
            let dinf = (rd.norm() + rdl.norm()) / cnorm;
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let cgap = (pobj - best) / (1.0 + pobj.abs() + best.abs());
            if pinf < self.tol && ((dinf < self.tol && gap < self.tol) || cgap < self.tol) {
                status = SdpStatus::Optimal;
                break;
            }
            if let Some(tb) = r.trace_bound {
                // no feasible X can beat |⟨C, X⟩| ≤ ‖C‖·tr X ≤ trace bound
                if best > tb + 1.0 {
                    status = SdpStatus::Infeasible;
                    break;
                }
            } else if pobj < -1e10 && pinf < 1e-6 {
                status = SdpStatus::Unbounded;
                break;
            }

            let mut schur = r.schur(&x, &zinv);
            for k in 0..mi {
                schur[(me + k, me + k)] += xs[k] / zs[k];
            }
            let diag_max = schur.diagonal().amax().max(1e-300);
            let mut ch = Cholesky::new(schur.clone());
            let mut reg = 1e-14;
            while ch.is_none() && reg < 1e-4 {
                let mut s = schur.clone();
                for i in 0..m {
                    s[(i, i)] += reg * diag_max;
                }
                ch = Cholesky::new(s);
                reg *= 100.0;
            }
            let Some(ch) = ch else { break };

            let direction = |sigma_mu: f64, corr: Option<(&DMatrix<f64>, &DVector<f64>)>| {
                // ΔX = σμZ⁻¹ − X − X ΔZ Z⁻¹ − corr, symmetrized
                let mut e = &zinv * sigma_mu - &x - &x * &rd * &zinv;
                let mut el = DVector::from_fn(mi, |k, _| sigma_mu / zs[k] - xs[k] - xs[k] / zs[k] * rdl[k]);
                if let Some((cx, cl)) = corr {
                    e -= cx;
                    el -= cl;
                }
                let mut rhs = &rp - r.op(&e);
                for k in 0..mi {
                    rhs[me + k] -= el[k];
                }
                let dy = ch.solve(&rhs);
                let dz = &rd - r.adj(&dy);
                let dzl = DVector::from_fn(mi, |k, _| rdl[k] - dy[me + k]);
                let mut dx = &zinv * sigma_mu - &x - &x * &dz * &zinv;
                let mut dxl = DVector::from_fn(mi, |k, _| sigma_mu / zs[k] - xs[k] - xs[k] / zs[k] * dzl[k]);
                if let Some((cx, cl)) = corr {
                    dx -= cx;
                    dxl -= cl;
                }
                (sym(dx), dxl, dy, sym(dz), dzl)
            };
            let steps = |dx: &DMatrix<f64>, dxl: &DVector<f64>, dz: &DMatrix<f64>, dzl: &DVector<f64>| {
                let ap = max_step(&x, dx).min(ratio_step(&xs, dxl));
                let ad = max_step(&z, dz).min(ratio_step(&zs, dzl));
                (ap, ad)
            };

            let (dxa, dxla, _, dza, dzla) = direction(0.0, None);
            let (apa, ada) = steps(&dxa, &dxla, &dza, &dzla);
            let (apa, ada) = (apa.min(1.0), ada.min(1.0));
            let mu_aff = ((&x + &dxa * apa).dot(&(&z + &dza * ada))
                + (&xs + &dxla * apa).dot(&(&zs + &dzla * ada)))
                / nu;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
            let corr_x = &dxa * &dza * &zinv;
            let corr_l = DVector::from_fn(mi, |k, _| dxla[k] * dzla[k] / zs[k]);
            let (dx, dxl, dy, dz, dzl) = direction(sigma * mu, Some((&corr_x, &corr_l)));
            let (ap, ad) = steps(&dx, &dxl, &dz, &dzl);
            let ap = (self.step_fraction * ap).min(1.0);
            let ad = (self.step_fraction * ad).min(1.0);
            if ap < 1e-10 && ad < 1e-10 {
                stalls += 1;
                if stalls > 3 {
                    break;
                }
            }
            x = sym(&x + dx * ap);
            xs += dxl * ap;
            y += dy * ad;
            z = sym(&z + dz * ad);
            zs += dzl * ad;
            if !x.iter().all(|v| v.is_finite()) || x.amax() > 1e14 || y.amax() > 1e14 {
                break;
            }
        }
        best = best.max(r.certified(&y));
        if status == SdpStatus::NumericalFailure && best.is_finite() {
            status = SdpStatus::NearOptimal;
        }
        if let Some(tb) = r.trace_bound {
            if best > tb + 1.0 {
                status = SdpStatus::Infeasible;
            }
        }
        Outcome { pobj, best, status, iterations: it }
    }
}

impl SdpSolver for InteriorPoint {
    fn solve(&self, p: &SdpProblem) -> SdpResult {
        let fail = |status| SdpResult {
            sense: p.sense,
            primal_value: f64::NAN,
            dual_bound: f64::NAN,
            status,
            iterations: 0,
        };
        if p.validate().is_err() {
            return fail(SdpStatus::NumericalFailure);
        }
        // back to the caller's sense: the internal problem maximizes
        let (sign, flip) = match p.sense {
            Sense::Maximize => (1.0, 1.0),
            Sense::Minimize => (-1.0, -1.0),
        };
        match prepare(p) {
            Prepared::Infeasible => fail(SdpStatus::Infeasible),
            Prepared::Constant(v) => SdpResult {
                sense: p.sense,
                primal_value: sign * v,
                dual_bound: sign * v,
                status: SdpStatus::Optimal,
                iterations: 0,
            },
            Prepared::Problem(r) => {
                let out = self.run(&r);
                let (pv, ub) = (-out.pobj * r.c_scale, -out.best * r.c_scale);
                match out.status {
                    SdpStatus::Optimal | SdpStatus::NearOptimal => SdpResult {
                        sense: p.sense,
                        primal_value: flip * pv,
                        dual_bound: flip * ub,
                        status: out.status,
                        iterations: out.iterations,
                    },
                    s => SdpResult { iterations: out.iterations, ..fail(s) },
                }
            }
        }
    }
}
