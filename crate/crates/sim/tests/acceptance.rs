//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setslam_core::conformal::{calibrate_records, nonconformity, triangulate, GeneratorConfig};
use setslam_core::liegroup::{exp_map, geodesic_distance, Pose};
use setslam_core::polytope::{
    chebyshev_ball, facet_enum, inflate, minkowski_sum, project, sample_uniform, template_normals, vertex_enum,
    HPolytope, TemplateKind, VPolytope,
};
use setslam_core::sdp::{
    build_rotball_sdp, certified_lower_bound, certified_upper_bound, solve, CompoundRelaxation, ForwardRelaxation,
};
use setslam_core::slam::{smooth, Framework, SlamConfig, SlamError, SlamState};
use setslam_core::uq::{compound_indirect, inner_max_rotated_dot, sample_pose_set, DecomposedPoseSet, RotationBallSet};
use setslam_sim::slamsim::summarize;
use setslam_sim::trials::{compound_instance, forward_instance, random_pose, random_rotation};
use setslam_sim::world::{gen_world, loop_closure, wrong_closure};
use setslam_sim::{conservatism_test, Primitive, TrialConfig, WorldConfig};

type Outcome = Result<String, String>;

fn dv(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn pose_vec(t: &Pose) -> DVector<f64> {
    DVector::from_column_slice(t.to_vector().as_slice())
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn trials(primitive: Primitive) -> Result<setslam_sim::Report, String> {
    let cfg = TrialConfig { primitive, ..TrialConfig::default() };
    conservatism_test(&cfg).map_err(|e| e.to_string())
}

fn summary(r: &setslam_sim::Report) -> (usize, usize, f64) {
    let inside = r.trials.iter().map(|t| t.inside).sum();
    let total = r.trials.iter().map(|t| t.n_samples).sum();
    let worst = r.trials.iter().map(|t| t.max_violation).fold(0.0, f64::max);
    (inside, total, worst)
}

fn forward_conservatism() -> Outcome {
    let r = trials(Primitive::Forward)?;
    let (inside, total, worst) = summary(&r);
    check(r.trials.len() == 6 && inside == total, format!("{inside}/{total} inside over {} trials, max violation {worst:e}", r.trials.len()))
}

fn backward_conservatism() -> Outcome {
    let r = trials(Primitive::Backward)?;
    let (inside, total, worst) = summary(&r);
    check(r.trials.len() == 6 && inside == total, format!("{inside}/{total} inside over {} trials, max violation {worst:e}", r.trials.len()))
}

fn compound_conservatism() -> Outcome {
    let d = trials(Primitive::CompoundDirect)?;
    let i = trials(Primitive::CompoundIndirect)?;
    let (di, dt, dw) = summary(&d);
    let (ii, it, iw) = summary(&i);
    let (sd, si) = (d.trials[0].spread.unwrap_or(f64::INFINITY), i.trials[0].spread.unwrap_or(0.0));
    check(
        di == dt && ii == it && sd <= si,
        format!("direct {di}/{dt} (max violation {dw:e}), indirect {ii}/{it} (max violation {iw:e}), spread {sd:.3} <= {si:.3}"),
    )
}

fn rotation_compounding() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let template = template_normals(&TemplateKind::BoxDiag45, 3).map_err(|e| e.to_string())?;
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..100 {
        let (t1, t2) = (random_pose(&mut rng), random_pose(&mut rng));
        let (a, b) = (rng.random_range(0.0..1.5), rng.random_range(0.0..1.5));
        let ball = |t: &Pose, th: f64| DecomposedPoseSet {
            rotation: RotationBallSet { center: t.rotation, radius: th },
            translation: HPolytope::from_box(&dv(&t.translation), &dv(&t.translation)),
        };
        let out = compound_indirect(&ball(&t1, a), &ball(&t2, b), &template).map_err(|e| e.to_string())?;
        if out.rotation.radius != a + b {
            return Err(format!("radius {} != {a} + {b}", out.rotation.radius));
        }
        let w = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        let r1 = t1.rotation.compose(&exp_map(&(w * a)));
        let r2 = t2.rotation.compose(&exp_map(&(t2.rotation.transpose().matrix() * w * b)));
        let dis = geodesic_distance(&r1.compose(&r2), &out.rotation.center);
        worst_gap = worst_gap.max(out.rotation.radius - dis);
    }
    check(worst_gap <= 1e-6, format!("radii add exactly on 100 instances; aligned samples within {worst_gap:e} of the radius"))
}

fn grid_inner_max(a: &Vector3<f64>, v: &Vector3<f64>, theta: f64) -> f64 {
    let e1 = a.cross(&if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() }).normalize();
    let e2 = a.cross(&e1);
    let mut best = f64::NEG_INFINITY;
    for i in 0..200 {
        let th = theta * i as f64 / 199.0;
        for j in 0..200 {
            let psi = TAU * j as f64 / 200.0;
            best = best.max((exp_map(&((e1 * psi.cos() + e2 * psi.sin()) * th)).matrix() * a).dot(v));
        }
    }
    best
}

fn inner_maximum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(402);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        let v = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let th = rng.random_range(0.0..PI);
        worst = worst.max((inner_max_rotated_dot(&a, &v, th) - grid_inner_max(&a, &v, th)).abs());
    }
    check(worst <= 1e-3, format!("max |closed form - grid| = {worst:e} on 100 instances"))
}

fn box_rows(center: &[f64], w: f64) -> (DMatrix<f64>, DVector<f64>) {
    let lo = DVector::from_iterator(center.len(), center.iter().map(|c| c - w));
    let hi = DVector::from_iterator(center.len(), center.iter().map(|c| c + w));
    let p = HPolytope::from_box(&lo, &hi);
    (p.a().clone(), p.b().clone())
}

fn sdp_bounds() -> Outcome {
    let cfg = TrialConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(403);
    let mut instances = 0;
    let mut samples = 0;
    for k in 0..3 {
        let inst = forward_instance(&cfg, k);
        let rel = ForwardRelaxation::new(inst.pose_set.h(), inst.pose_set.d()).map_err(|e| e.to_string())?;
        let poses = sample_pose_set(&inst.pose_set, 1000, 10 + k as u64).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            let v = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let a = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
            let ub = certified_upper_bound(&solve(&rel.problem(&v, &a)), None).map_err(|e| e.to_string())?;
            for t in &poses {
                if a.dot(&t.apply(&v)) > ub {
                    return Err(format!("forward sample {} above bound {ub}", a.dot(&t.apply(&v))));
                }
            }
            instances += 1;
            samples += poses.len();
        }
    }
    for k in 0..3 {
        let inst = compound_instance(&cfg, k);
        let rel = CompoundRelaxation::new(inst.p1.h(), inst.p1.d(), inst.p2.h(), inst.p2.d()).map_err(|e| e.to_string())?;
        let s1 = sample_pose_set(&inst.p1, 1000, 20 + k as u64).map_err(|e| e.to_string())?;
        let s2 = sample_pose_set(&inst.p2, 1000, 30 + k as u64).map_err(|e| e.to_string())?;
        let prods: Vec<DVector<f64>> = s1.iter().zip(&s2).map(|(x, y)| pose_vec(&x.compose(y))).collect();
        for _ in 0..2 {
            let a = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0)).normalize();
            let ub = certified_upper_bound(&solve(&rel.problem(&a).map_err(|e| e.to_string())?), None)
                .map_err(|e| e.to_string())?;
            if let Some(x) = prods.iter().find(|x| a.dot(x) > ub) {
                return Err(format!("compound sample {} above bound {ub}", a.dot(x)));
            }
            instances += 1;
            samples += prods.len();
        }
    }
    for _ in 0..3 {
        let r0 = random_rotation(&mut rng);
        let x0: Vec<f64> = r0.vec().iter().copied().collect();
        let (a, b) = box_rows(&x0, 0.1);
        let lb = certified_lower_bound(&solve(&build_rotball_sdp(&x0, &a, &b).map_err(|e| e.to_string())?), None)
            .map_err(|e| e.to_string())?;
        let mut n = 0;
        while n < 1000 {
            let rs = r0.compose(&exp_map(&Vector3::from_fn(|_, _| rng.random_range(-0.08..0.08))));
            let xs = DVector::from_column_slice(rs.vec().as_slice());
            if (&a * &xs - &b).iter().all(|s| *s <= 0.0) {
                n += 1;
                let val = (rs.matrix() * r0.matrix().transpose()).trace();
                if val < lb {
                    return Err(format!("rotation sample trace {val} below bound {lb}"));
                }
            }
        }
        instances += 1;
        samples += n;
    }
    Ok(format!("0 violations over {instances} relaxations and {samples} feasible samples"))
}

fn conformal_coverage() -> Outcome {
    let gen = GeneratorConfig::default();
    let rig = gen.rig();
    let mut lines = Vec::new();
    let mut ok = true;
    for delta in [0.05, 0.1] {
        let mut covered = 0usize;
        let mut total = 0usize;
        for rep in 0..20u64 {
            let cal = calibrate_records(&gen.generate(200, 1000 + rep), &rig, delta).map_err(|e| e.to_string())?;
            let c = cal.c.finite().ok_or("infinite quantile")?;
            for r in gen.generate(1000, 5000 + rep) {
                let (p, s) = triangulate(&r.u, &r.v, &rig).map_err(|e| e.to_string())?;
                covered += usize::from(nonconformity(&p, &s, &r.p_true) <= c);
                total += 1;
            }
        }
        let cov = covered as f64 / total as f64;
        ok &= cov >= 1.0 - delta - 0.02;
        lines.push(format!("delta {delta}: coverage {cov:.4}"));
    }
    check(ok, format!("{} (20 calibration draws x 1000 test points)", lines.join(", ")))
}

fn hull2(points: &[[f64; 2]]) -> Vec<DVector<f64>> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut h: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = h.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while h.len() >= start + 2 && cross(h[h.len() - 2], h[h.len() - 1], q) <= 1e-12 {
                h.pop();
            }
            h.push(q);
        }
        h.pop();
    }
    h.into_iter().map(|x| DVector::from_column_slice(&x)).collect()
}

fn hausdorff(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let d = |x: &DVector<f64>, s: &[DVector<f64>]| s.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
    a.iter().map(|x| d(x, b)).chain(b.iter().map(|y| d(y, a))).fold(0.0, f64::max)
}

fn golden(lo: f64, hi: f64, g: &dyn Fn(f64) -> f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if g(c) < g(d) { b = d } else { a = c }
    }
    g(0.5 * (a + b))
}

fn search_radius(pts: &[DVector<f64>]) -> f64 {
    let f = |c: &DVector<f64>| pts.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    golden(-2.0, 2.0, &|x| golden(-2.0, 2.0, &|y| golden(-2.0, 2.0, &|z| f(&DVector::from_vec(vec![x, y, z])))))
}

fn cloud(rng: &mut impl Rng, count: usize) -> Vec<DVector<f64>> {
    (0..count).map(|_| DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0))).collect()
}

fn polytope_oracles() -> Outcome {
    let e = |e: setslam_core::error::PolytopeError| e.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut fm_worst = 0.0f64;
    for _ in 0..50 {
        let h = facet_enum(&VPolytope::new(cloud(&mut rng, 20)).map_err(e)?).map_err(e)?;
        let i = rng.random_range(0..3);
        let j = (i + rng.random_range(1..3)) % 3;
        let (i, j) = (i.min(j), i.max(j));
        let fm = vertex_enum(&project(&h, &[i, j]).map_err(e)?).map_err(e)?;
        let shadow: Vec<[f64; 2]> = vertex_enum(&h).map_err(e)?.vertices().iter().map(|x| [x[i], x[j]]).collect();
        fm_worst = fm_worst.max(hausdorff(fm.vertices(), &hull2(&shadow)));
    }
    let mut support_worst = 0.0f64;
    for _ in 0..10 {
        let p1 = VPolytope::new(cloud(&mut rng, 15)).map_err(e)?;
        let p2 = VPolytope::new(cloud(&mut rng, 15)).map_err(e)?;
        let s = minkowski_sum(&p1, &p2).map_err(e)?;
        for _ in 0..100 {
            let d = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)).normalize();
            let hs = s.support(&d).map_err(e)?.ok_or("unbounded sum")?;
            support_worst = support_worst.max((hs - p1.support(&d) - p2.support(&d)).abs());
        }
    }
    let mut ball_worst = 0.0f64;
    for _ in 0..5 {
        let pts = cloud(&mut rng, 12);
        let b = chebyshev_ball(&VPolytope::new(pts.clone()).map_err(e)?);
        ball_worst = ball_worst.max((b.radius - search_radius(&pts)).abs());
    }
    let mut inflate_bad = 0usize;
    for _ in 0..5 {
        let h = facet_enum(&VPolytope::new(cloud(&mut rng, 20)).map_err(e)?).map_err(e)?;
        let eps = rng.random_range(0.01..0.2);
        let big = inflate(&h, eps).map_err(e)?;
        for x in sample_uniform(&h, 2000, &mut rng).map_err(e)? {
            let u = loop {
                let u = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
                if u.norm() <= 1.0 {
                    break u;
                }
            };
            inflate_bad += usize::from(!big.contains(&(x + u * eps), 0.0));
        }
    }
    check(
        fm_worst <= 1e-8 && support_worst <= 1e-9 && ball_worst <= 1e-4 && inflate_bad == 0,
        format!(
            "projection Hausdorff {fm_worst:e} (50 cases), support gap {support_worst:e}, ball gap {ball_worst:e}, inflation violations {inflate_bad}"
        ),
    )
}

fn offsets(state: &SlamState) -> Vec<DVector<f64>> {
    state
        .trajectory
        .iter()
        .map(|e| e.pose_set.d().clone())
        .chain(state.map.values().map(|m| m.global_set.b().clone()))
        .collect()
}

fn slam_framework(framework: Framework) -> Outcome {
    let world = gen_world(&WorldConfig::default()).map_err(|e| e.to_string())?;
    let mut state = SlamState::new(SlamConfig { framework, max_smoothing_iters: 1, ..SlamConfig::default() });
    for f in &world.frames {
        state.process(f.clone()).map_err(|e| e.to_string())?;
    }
    let good = loop_closure(&world).ok_or("no loop closure in the world")?;
    let bad = wrong_closure(&world, &good).ok_or("no wrong closure")?;
    let before = state.clone();
    let rejected = {
        let mut probe = state.clone();
        probe.config.max_smoothing_iters = SlamConfig::default().max_smoothing_iters;
        let snapshot = probe.clone();
        matches!(smooth(&bad, &mut probe), Err(SlamError::LoopRejected { .. })) && probe == snapshot
    };
    let mut monotone = true;
    let mut shrinks = Vec::new();
    for _ in 0..3 {
        let prev = offsets(&state);
        let r = smooth(&good, &mut state).map_err(|e| e.to_string())?;
        monotone &= prev.iter().zip(offsets(&state)).all(|(o, n)| o.len() == n.len() && n.iter().zip(o.iter()).all(|(x, y)| x <= y));
        shrinks.push(format!("{:.3}", r.shrink[0]));
        if r.shrink[0] < 0.01 {
            break;
        }
    }
    let s = summarize(&world, &state.output(), 1e-7);
    let before_sum = summarize(&world, &before.output(), 1e-7);
    check(
        s.all_contained() && before_sum.all_contained() && monotone && rejected,
        format!(
            "poses {}/{}, landmarks {}/{} after smoothing ({} links matched), d non-increasing {monotone}, shrink [{}], wrong closure rejected {rejected}",
            s.poses_inside,
            s.frames,
            s.landmarks_inside,
            s.landmarks,
            good.matches.len(),
            shrinks.join(", ")
        ),
    )
}

fn slam_pipeline() -> Outcome {
    let mut parts = BTreeMap::new();
    let mut ok = true;
    for (name, fw) in [("relative", Framework::Relative), ("global", Framework::Global)] {
        match slam_framework(fw) {
            Ok(d) => parts.insert(name, d),
            Err(d) => {
                ok = false;
                parts.insert(name, d)
            }
        };
    }
    let detail = parts.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("; ");
    check(ok, detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("forward conservatism", forward_conservatism),
        ("backward conservatism", backward_conservatism),
        ("pose-compound conservatism", compound_conservatism),
        ("rotation compounding exactness", rotation_compounding),
        ("closed-form inner maximum", inner_maximum),
        ("SDP upper-bound property", sdp_bounds),
        ("conformal coverage", conformal_coverage),
        ("polytope oracle suite", polytope_oracles),
        ("SLAM pipeline containment", slam_pipeline),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("PASS {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
