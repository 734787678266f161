use setslam_core::liegroup::{Pose, Rotation};
use setslam_core::error::UqError;
use setslam_core::polytope::HPolytope;
use setslam_core::uq::*;
use setslam_core::liegroup::{exp_map, geodesic_distance};
use setslam_core::polytope::{template_normals, vertex_enum, Enclosure, TemplateKind};
use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v3(p: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(p.as_slice())
}

fn random_rotation(rng: &mut impl Rng) -> Rotation {
    let w = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    exp_map(&(w.normalize() * rng.random_range(0.0..3.0)))
}

fn random_pose(rng: &mut impl Rng) -> Pose {
    Pose::new(random_rotation(rng), Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0)))
}

fn cube(center: &Vector3<f64>, half: f64) -> HPolytope {
    let c = v3(center);
    let w = DVector::from_element(3, half);
    HPolytope::from_box(&(&c - &w), &(&c + &w))
}

fn diag45() -> DMatrix<f64> {
    template_normals(&TemplateKind::BoxDiag45, 3).unwrap()
}

fn uniform_in_box(rng: &mut impl Rng, c: &Vector3<f64>, half: f64) -> Vector3<f64> {
    c + Vector3::from_fn(|_, _| rng.random_range(-half..=half))
}

#[test]
fn forward_identity_reproduces_point_set() {
    let p = cube(&Vector3::new(1.0, -2.0, 0.5), 0.1);
    let pose = PosePolytope::point(&Pose::identity());
    let a = template_normals(&TemplateKind::Box, 3).unwrap();
    let out = forward_uq(&p, &pose, &a).unwrap().set().unwrap();
    for m in 0..a.nrows() {
        let own = p.support(&a.row(m).transpose()).unwrap().unwrap();
        let got = out.b()[m];
        assert!(got >= own && got - own <= 1e-5, "{got} vs {own}");
    }
}

#[test]
fn forward_pure_translation_is_minkowski_sum() {
    let p = cube(&Vector3::new(0.5, 0.0, 2.0), 0.1);
    let t0 = Vector3::new(1.0, 2.0, 3.0);
    let mut pose = PosePolytope::point(&Pose::new(Rotation::identity(), t0));
    let (h, mut d) = (pose.h().clone(), pose.d().clone());
    for k in 9..12 {
        d[k] += 0.2;
        d[12 + k] += 0.2;
    }
    pose = PosePolytope::new(h, d).unwrap();
    let a = diag45();
    let out = forward_uq(&p, &pose, &a).unwrap().set().unwrap();
    let tbox = cube(&t0, 0.2);
    for m in 0..a.nrows() {
        let dir = a.row(m).transpose();
        let want = p.support(&dir).unwrap().unwrap() + tbox.support(&dir).unwrap().unwrap();
        assert!(out.b()[m] >= want - 1e-12 && out.b()[m] <= want + 1e-4, "{} vs {want}", out.b()[m]);
    }
}

#[test]
fn forward_contains_sampled_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = random_pose(&mut rng);
    let pc = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
    let half = 0.5 * rng.random_range(0.08..0.2);
    let p = cube(&pc, half);
    let pose = PosePolytope::around(&t, rng.random_range(0.01..0.02), rng.random_range(0.05..0.1));
    let out = forward_uq(&p, &pose, &diag45()).unwrap().set().unwrap();
    let poses = sample_pose_set(&pose, 1000, 5).unwrap();
    for (k, tk) in poses.iter().enumerate() {
        let q = tk.apply(&uniform_in_box(&mut rng, &pc, half));
        assert!(out.contains(&v3(&q), 1e-9), "sample {k} escapes");
    }
}

#[test]
fn forward_empty_inputs_give_marker() {
    let mut d = PosePolytope::point(&Pose::identity()).d().clone();
    d[0] = -2.0;
    let h = PosePolytope::point(&Pose::identity()).h().clone();
    let empty_pose = PosePolytope::new(h, d).unwrap();
    let p = cube(&Vector3::zeros(), 0.1);
    assert!(forward_uq(&p, &empty_pose, &diag45()).unwrap().is_empty());
    let empty_pts = HPolytope::new(DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0]), DVector::from_vec(vec![-1.0, -1.0]))
        .unwrap()
        .stack(&p)
        .unwrap();
    assert!(forward_uq(&empty_pts, &PosePolytope::point(&Pose::identity()), &diag45()).unwrap().is_empty());
}

#[test]
fn backward_point_local_is_exact_preimage() {
    let s = Vector3::new(0.3, -1.0, 2.0);
    let global = cube(&Vector3::new(1.0, 1.0, 1.0), 0.2);
    let out = backward_uq(&HPolytope::point(&v3(&s)), &global, BackwardMode::Chebyshev).unwrap().set().unwrap();
    let norm = (1.0 + s.norm_squared()).sqrt();
    for i in 0..global.n_rows() {
        assert!((out.d()[i] * norm - global.b()[i]).abs() < 1e-12);
        for k in 0..3 {
            assert!((out.h()[(i, 9 + k)] * norm - global.a()[(i, k)]).abs() < 1e-12);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let r = random_rotation(&mut rng);
        let q = uniform_in_box(&mut rng, &Vector3::new(1.0, 1.0, 1.0), 0.25);
        let t = Pose::new(r, q - r.matrix() * s);
        if global.contains(&v3(&q), 0.0) {
            assert!(out.contains_pose(&t, 1e-12));
        }
        if global.max_violation(&v3(&q)) > 1e-6 {
            assert!(!out.contains_pose(&t, 0.0));
        }
    }
    let dm = backward_uq(&HPolytope::point(&v3(&s)), &global, BackwardMode::Diameter).unwrap().set().unwrap();
    assert_eq!(dm.d(), out.d());
}

/// Samples of `{T : ∃ p ∈ local, Rp + t ∈ global}`.
fn sample_backward_truth(rng: &mut impl Rng, pc: &Vector3<f64>, ph: f64, qc: &Vector3<f64>, qh: f64) -> Pose {
    let r = random_rotation(rng);
    let p = uniform_in_box(rng, pc, ph);
    let q = uniform_in_box(rng, qc, qh);
    Pose::new(r, q - r.matrix() * p)
}

#[test]
fn backward_modes_contain_defining_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (pc, qc) = (Vector3::new(1.0, 0.0, 2.0), Vector3::new(-1.0, 3.0, 0.5));
    let local = cube(&pc, 0.05);
    let global = cube(&qc, 0.03);
    for mode in [BackwardMode::Chebyshev, BackwardMode::Diameter] {
        let out = backward_uq(&local, &global, mode).unwrap().set().unwrap();
        for _ in 0..1000 {
            let t = sample_backward_truth(&mut rng, &pc, 0.05, &qc, 0.03);
            assert!(out.contains_pose(&t, 1e-9));
        }
    }
}

#[test]
fn backward_multi_contains_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let t0 = random_pose(&mut rng);
    let pairs: Vec<(HPolytope, HPolytope)> = (0..15)
        .map(|_| {
            let p = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let q = t0.apply(&p) + Vector3::from_fn(|_, _| rng.random_range(-0.02..0.02));
            let pn = p + Vector3::from_fn(|_, _| rng.random_range(-0.02..0.02));
            (cube(&pn, 0.025), cube(&q, 0.025))
        })
        .collect();
    let out = backward_uq_multi(&pairs, BackwardMode::Chebyshev).unwrap().set().unwrap();
    assert!(out.contains_pose(&t0, 1e-9));
    let single = backward_uq_multi(&pairs[..1], BackwardMode::Chebyshev).unwrap().set().unwrap();
    assert_eq!(single, backward_uq(&pairs[0].0, &pairs[0].1, BackwardMode::Chebyshev).unwrap().set().unwrap());
    let dup = backward_uq_multi(&[pairs[0].clone(), pairs[0].clone()], BackwardMode::Chebyshev).unwrap().set().unwrap();
    for _ in 0..20 {
        let dir = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        let s1 = single.polytope().support(&dir).unwrap().unwrap();
        let s2 = dup.polytope().support(&dir).unwrap().unwrap();
        assert!((s1 - s2).abs() <= 1e-7 * s1.abs().max(1.0));
    }
}

#[test]
fn backward_inconsistent_pairs_are_empty() {
    let pairs = vec![
        (cube(&Vector3::zeros(), 0.01), cube(&Vector3::zeros(), 0.01)),
        (cube(&Vector3::new(1.0, 0.0, 0.0), 0.01), cube(&Vector3::new(5.0, 0.0, 0.0), 0.01)),
    ];
    assert!(backward_uq_multi(&pairs, BackwardMode::Chebyshev).unwrap().is_empty());
    assert!(backward_uq_multi(&[], BackwardMode::Chebyshev).is_err());
}

fn box12() -> DMatrix<f64> {
    template_normals(&TemplateKind::Box, 12).unwrap()
}

#[test]
fn compound_direct_tight_boxes_hit_the_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (t1, t2) = (random_pose(&mut rng), random_pose(&mut rng));
    let out = compound_direct(&PosePolytope::point(&t1), &PosePolytope::point(&t2), &box12()).unwrap().set().unwrap();
    let x = DVector::from_column_slice(t1.compose(&t2).to_vector().as_slice());
    let slack = out.d() - out.h() * &x;
    assert!(slack.min() >= 0.0, "{}", slack.min());
    assert!(slack.max() <= 1e-4, "{}", slack.max());
}

#[test]
fn compound_direct_identity_and_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let t1 = random_pose(&mut rng);
    let p1 = PosePolytope::around(&t1, 0.015, 0.07);
    let with_id = compound_direct(&p1, &PosePolytope::point(&Pose::identity()), &box12()).unwrap().set().unwrap();
    for t in sample_pose_set(&p1, 300, 1).unwrap() {
        assert!(with_id.contains_pose(&t, 1e-9));
    }
    let t2 = random_pose(&mut rng);
    let p2 = PosePolytope::around(&t2, 0.02, 0.05);
    let out = compound_direct(&p1, &p2, &box12()).unwrap().set().unwrap();
    let s1 = sample_pose_set(&p1, 1000, 2).unwrap();
    let s2 = sample_pose_set(&p2, 1000, 3).unwrap();
    for (a, b) in s1.iter().zip(&s2) {
        assert!(out.contains_pose(&a.compose(b), 1e-9));
    }
}

#[test]
fn decompose_zero_rotation_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let t0 = random_pose(&mut rng);
    let d = decompose_pose_set(&PosePolytope::around(&t0, 0.0, 0.1)).unwrap().set().unwrap();
    assert!(d.rotation.radius <= 1e-4, "{}", d.rotation.radius);
    assert!((d.rotation.center.matrix() - t0.rotation.matrix()).amax() <= 1e-6);
    assert!(d.contains_pose(&t0, 1e-9));
}

#[test]
fn decompose_contains_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let t0 = random_pose(&mut rng);
    let p = PosePolytope::around(&t0, 0.02, 0.08);
    let d = decompose_pose_set(&p).unwrap().set().unwrap();
    assert!(d.rotation.radius > 0.0 && d.rotation.radius < 0.2);
    for t in sample_pose_set(&p, 1000, 4).unwrap() {
        assert!(geodesic_distance(&t.rotation, &d.rotation.center) <= d.rotation.radius + 1e-6);
        assert!(d.translation.contains(&v3(&t.translation), 1e-9));
    }
}

#[test]
fn decompose_backward_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let t0 = random_pose(&mut rng);
    let pairs: Vec<(HPolytope, HPolytope)> = (0..6)
        .map(|_| {
            let p = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            (cube(&p, 0.01), cube(&t0.apply(&p), 0.01))
        })
        .collect();
    let set = backward_uq_multi(&pairs, BackwardMode::Chebyshev).unwrap().set().unwrap();
    let d = decompose_pose_set(&set).unwrap().set().unwrap();
    assert!(d.contains_pose(&t0, 1e-9));
    for t in sample_pose_set(&set, 200, 9).unwrap() {
        assert!(d.contains_pose(&t, 1e-6));
    }
}

fn ball_set(center: Rotation, theta: f64, t: &Vector3<f64>, half: f64) -> DecomposedPoseSet {
    DecomposedPoseSet { rotation: RotationBallSet { center, radius: theta }, translation: cube(t, half) }
}

#[test]
fn indirect_adds_angles_and_composes_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (t1, t2) = (random_pose(&mut rng), random_pose(&mut rng));
    let point = |t: &Pose| ball_set(t.rotation, 0.0, &t.translation, 0.0);
    let out = compound_indirect(&point(&t1), &point(&t2), &diag45()).unwrap();
    let t3 = t1.compose(&t2);
    assert_eq!(out.rotation.radius, 0.0);
    assert!((out.rotation.center.matrix() - t3.rotation.matrix()).amax() < 1e-12);
    let verts = vertex_enum(&out.translation).unwrap();
    for v in verts.vertices() {
        assert!((v - v3(&t3.translation)).amax() < 1e-9);
    }
    let d1 = ball_set(t1.rotation, 0.1, &t1.translation, 0.05);
    let d2 = ball_set(t2.rotation, 0.2, &t2.translation, 0.05);
    let out = compound_indirect(&d1, &d2, &diag45()).unwrap();
    assert_eq!(out.rotation.radius, 0.1 + 0.2);
    let big = compound_indirect(&ball_set(t1.rotation, 2.0, &t1.translation, 0.05), &d2, &diag45()).unwrap();
    assert_eq!(big.rotation.radius, 2.2);
    let huge = compound_indirect(&ball_set(t1.rotation, 3.0, &t1.translation, 0.05), &d2, &diag45()).unwrap();
    assert_eq!(huge.rotation.radius, std::f64::consts::PI);
}

#[test]
fn indirect_contains_sampled_compositions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (t1, t2) = (random_pose(&mut rng), random_pose(&mut rng));
    let d1 = ball_set(t1.rotation, 0.05, &t1.translation, 0.08);
    let d2 = ball_set(t2.rotation, 0.03, &t2.translation, 0.06);
    let out = compound_indirect(&d1, &d2, &diag45()).unwrap();
    let s1 = sample_pose_set(&d1, 1000, 6).unwrap();
    let s2 = sample_pose_set(&d2, 1000, 7).unwrap();
    for (a, b) in s1.iter().zip(&s2) {
        assert!(out.contains_pose(&a.compose(b), 1e-9));
    }
    // aligned axes reach the summed radius
    let w = Vector3::new(0.3, -0.4, 0.5).normalize();
    let r1 = t1.rotation.compose(&exp_map(&(w * 0.05)));
    let w2 = t2.rotation.transpose().matrix() * w;
    let r2 = t2.rotation.compose(&exp_map(&(w2 * 0.03)));
    let dis = geodesic_distance(&r1.compose(&r2), &out.rotation.center);
    assert!(dis >= out.rotation.radius - 1e-6, "{dis}");
}

/// Brute force over `θ ∈ [0, θ′]` and axes `w ⟂ a` on a 200×200 grid; axes
/// along `a` only reach the same cap of directions.
fn grid_inner_max(a: &Vector3<f64>, v: &Vector3<f64>, theta: f64) -> f64 {
    let e1 = a.cross(&if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() }).normalize();
    let e2 = a.cross(&e1);
    let mut best = f64::NEG_INFINITY;
    for i in 0..200 {
        let th = theta * i as f64 / 199.0;
        for j in 0..200 {
            let psi = std::f64::consts::TAU * j as f64 / 200.0;
            let w = e1 * psi.cos() + e2 * psi.sin();
            best = best.max((exp_map(&(w * th)).matrix() * a).dot(v));
        }
    }
    best
}

#[test]
fn inner_max_examples_and_grid() {
    let v = Vector3::new(1.0, 2.0, -2.0);
    assert!((inner_max_rotated_dot(&v.normalize(), &v, 0.3) - 3.0).abs() < 1e-12);
    let half = inner_max_rotated_dot(&Vector3::x(), &Vector3::y(), std::f64::consts::FRAC_PI_6);
    assert!((half - 0.5).abs() < 1e-12);
    assert_eq!(inner_max_rotated_dot(&Vector3::x(), &Vector3::zeros(), 1.0), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let a = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        let v = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let th = rng.random_range(0.0..std::f64::consts::PI);
        let closed = inner_max_rotated_dot(&a, &v, th);
        let grid = grid_inner_max(&a, &v, th);
        assert!(closed >= grid - 1e-9 && closed - grid <= 1e-3, "{closed} vs {grid}");
    }
}

#[test]
fn rotball_polytope_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let c = random_rotation(&mut rng);
    let a = template_normals(&TemplateKind::Box, 9).unwrap();
    let zero = rotball_to_polytope(&RotationBallSet { center: c, radius: 0.0 }, &a).unwrap();
    let x = DVector::from_column_slice(c.vec().as_slice());
    assert!((zero.b() - zero.a() * &x).amax() < 1e-15);
    let full = rotball_to_polytope(&RotationBallSet { center: c, radius: std::f64::consts::PI }, &a).unwrap();
    assert!(((full.b() - full.a() * &x).amax() - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
    let ball = RotationBallSet { center: c, radius: 0.4 };
    let p = rotball_to_polytope(&ball, &template_normals(&TemplateKind::BoxDiag45, 9).unwrap()).unwrap();
    for _ in 0..1000 {
        let w = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize() * rng.random_range(0.0..=0.4);
        let r = c.compose(&exp_map(&w));
        assert!(p.contains(&DVector::from_column_slice(r.vec().as_slice()), 1e-9));
    }
}

#[test]
fn sampling_point_set_and_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let t0 = random_pose(&mut rng);
    let p = PosePolytope::point(&t0);
    let s = sample_pose_set(&p, 5, 0).unwrap();
    assert!(s.iter().all(|t| t.to_vector() == t0.to_vector()));
    let b = PosePolytope::around(&t0, 0.02, 0.1);
    let s = sample_pose_set(&b, 200, 1).unwrap();
    assert!(s.iter().all(|t| b.contains_pose(t, 0.0)));
    assert_eq!(s, sample_pose_set(&b, 200, 1).unwrap());
    let hull = b.polytope().interval_hull().unwrap().unwrap();
    for t in &s {
        let x = t.to_vector();
        assert!((0..12).all(|k| hull[k].0 <= x[k] && x[k] <= hull[k].1));
    }
}

#[test]
fn sampling_thin_set_fails() {
    let base = PosePolytope::around(&Pose::identity(), 0.01, 1.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = DMatrix::zeros(2, 12);
    h[(0, 9)] = s;
    h[(0, 10)] = s;
    h[(1, 9)] = -s;
    h[(1, 10)] = -s;
    let slab = HPolytope::new(h, DVector::from_vec(vec![1e-9, 1e-9])).unwrap();
    let thin = PosePolytope::from_polytope(base.polytope().stack(&slab).unwrap()).unwrap();
    assert_eq!(sample_pose_set(&thin, 10, 0).unwrap_err(), UqError::TooThin);
}

#[test]
fn json_shapes() {
    let p = PosePolytope::around(&Pose::identity(), 0.01, 0.1);
    let j = p.to_json();
    assert!(j.starts_with("{\"H\":"));
    assert_eq!(PosePolytope::from_json(&j).unwrap(), p);
    assert!(PosePolytope::from_json("{\"H\":[[1.0]],\"d\":[1.0]}").is_err());
    let d = ball_set(exp_map(&Vector3::new(0.1, 0.2, 0.3)), 0.25, &Vector3::new(1.0, 2.0, 3.0), 0.1);
    let j = d.to_json();
    for key in ["\"R_bar\"", "\"theta\"", "\"At\"", "\"bt\""] {
        assert!(j.contains(key));
    }
    let back = DecomposedPoseSet::from_json(&j).unwrap();
    assert!((back.rotation.center.matrix() - d.rotation.center.matrix()).amax() < 1e-15);
    assert!(DecomposedPoseSet::from_json(&j.replace("0.25", "4.0")).is_err());
    let _: Enclosure<PosePolytope> = Enclosure::Empty;
}

proptest! {
    #[test]
    fn inner_max_bounds(ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0,
                        vx in -3.0f64..3.0, vy in -3.0f64..3.0, vz in -3.0f64..3.0,
                        t1 in 0.0f64..1.5, dt in 0.0f64..1.5) {
        let a = Vector3::new(ax, ay, az).normalize();
        let v = Vector3::new(vx, vy, vz);
        let lo = inner_max_rotated_dot(&a, &v, t1);
        let hi = inner_max_rotated_dot(&a, &v, t1 + dt);
        prop_assert!(lo >= a.dot(&v) - 1e-12);
        prop_assert!(lo <= v.norm() + 1e-12);
        prop_assert!(hi >= lo - 1e-12);
    }
}
