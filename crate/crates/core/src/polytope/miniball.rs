//! Smallest enclosing ball (Welzl).

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Ball, VPolytope};

/// Minimal ball enclosing all vertices, hence the polytope.
pub fn chebyshev_ball(v: &VPolytope) -> Ball {
    let mut pts: Vec<DVector<f64>> = super::dedupe_points(v.vertices().to_vec(), 0.0);
    // fixed shuffle: expected linear time, reproducible output
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x6d62));
    let dim = v.dim();
    let scale = pts.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let mut boundary = Vec::with_capacity(dim + 1);
    let ball = welzl(&pts, pts.len(), &mut boundary, dim, 1e-12 * scale);
    let radius = pts.iter().map(|p| (p - &ball.center).norm()).fold(0.0, f64::max);
    Ball { center: ball.center, radius }
}

fn welzl(pts: &[DVector<f64>], n: usize, boundary: &mut Vec<DVector<f64>>, dim: usize, tol: f64) -> Ball {
    if n == 0 || boundary.len() == dim + 1 {
        return circumball(boundary, dim);
    }
    let p = &pts[n - 1];
    let ball = welzl(pts, n - 1, boundary, dim, tol);
    if ball.radius >= 0.0 && (p - &ball.center).norm() <= ball.radius + tol {
        return ball;
    }
    boundary.push(p.clone());
    let ball = welzl(pts, n - 1, boundary, dim, tol);
    boundary.pop();
    ball
}

/// Smallest ball with every point on its sphere.
fn circumball(b: &[DVector<f64>], dim: usize) -> Ball {
    match b.len() {
        0 => Ball { center: DVector::zeros(dim), radius: -1.0 },
        1 => Ball { center: b[0].clone(), radius: 0.0 },
        k => {
            let p0 = &b[0];
            let d: Vec<DVector<f64>> = b[1..].iter().map(|p| p - p0).collect();
            let g = DMatrix::from_fn(k - 1, k - 1, |i, j| d[i].dot(&d[j]));
            let rhs = DVector::from_fn(k - 1, |i, _| 0.5 * d[i].dot(&d[i]));
            let lam = g
                .svd(true, true)
                .solve(&rhs, 1e-14)
                .unwrap_or_else(|_| DVector::zeros(k - 1));
            let mut c = p0.clone();
            for (l, di) in lam.iter().zip(&d) {
                c += di * *l;
            }
            let r = b.iter().map(|p| (p - &c).norm()).fold(0.0, f64::max);
            Ball { center: c, radius: r }
        }
    }
}
