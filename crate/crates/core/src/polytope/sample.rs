//! Test-side samplers. Guarantees never depend on their quality.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::{vertex_enum, HPolytope};
use crate::error::PolytopeError;

const BURN_IN: usize = 100;
const THIN: usize = 5;

/// Hit-and-run chain inside a full-dimensional polytope.
pub struct HitAndRun<'a> {
    p: &'a HPolytope,
    x: DVector<f64>,
}

impl<'a> HitAndRun<'a> {
    pub fn new(p: &'a HPolytope, start: DVector<f64>) -> Self {
        HitAndRun { p, x: start }
    }

    pub fn step(&mut self, rng: &mut impl Rng) {
        let n = self.x.len();
        let d = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
        let ad = self.p.a() * &d;
        let slack = self.p.b() - self.p.a() * &self.x;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..ad.len() {
            let s = slack[i].max(0.0);
            if ad[i] > 1e-14 {
                hi = hi.min(s / ad[i]);
            } else if ad[i] < -1e-14 {
                lo = lo.max(s / ad[i]);
            }
        }
        if lo.is_finite() && hi.is_finite() && hi > lo {
            self.x += d * rng.random_range(lo..=hi);
        }
    }

    pub fn current(&self) -> &DVector<f64> {
        &self.x
    }
}

/// `n` points of `p`: hit-and-run when `p` has interior, random convex
/// combinations of vertices otherwise.
pub fn sample_uniform(p: &HPolytope, n: usize, rng: &mut impl Rng) -> Result<Vec<DVector<f64>>, PolytopeError> {
    let ball = p.inscribed_ball()?;
    let scale = p.scale();
    if ball.radius < -super::EMPTY_TOL * scale {
        return Err(PolytopeError::EmptySet);
    }
    if ball.radius <= 1e-9 * scale {
        let v = vertex_enum(p)?;
        let verts = v.vertices();
        return Ok((0..n)
            .map(|_| {
                let w: Vec<f64> = verts.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = w.iter().sum();
                verts
                    .iter()
                    .zip(&w)
                    .fold(DVector::zeros(p.dim()), |acc, (x, wi)| acc + x * (wi / total))
            })
            .collect());
    }
    let mut chain = HitAndRun::new(p, ball.center);
    for _ in 0..BURN_IN {
        chain.step(rng);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..THIN {
            chain.step(rng);
        }
        out.push(chain.current().clone());
    }
    Ok(out)
}
