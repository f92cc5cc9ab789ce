use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{LN_2, PI};
use wazcode::flow::*;
use wazcode::geometry::RegionTag;
use wazcode::model::*;

fn slow() -> ModelParams {
    ModelParams::exploration(0.3)
}

#[test]
fn equilibria_stay_put() {
    let f0 = Perturbation::zero();
    let tol = Tolerance::default();
    for p in [ModelParams::exploration(2.0), ModelParams::default()] {
        let seg = integrate(Frame::Z, 0.0, C::new(1.0, 0.0), 2.0 * PI, &p, &f0, tol).unwrap();
        for (_, z) in seg.sample(20) {
            assert_eq!(z, C::new(1.0, 0.0));
        }
        assert_eq!(poincare(C::new(1.0, 0.0), &p, &f0, tol).unwrap(), C::new(1.0, 0.0));
        assert_eq!(poincare(C::new(-1.0, 0.0), &p, &f0, tol).unwrap(), C::new(-1.0, 0.0));
    }
}

#[test]
fn frames_agree() {
    let p = ModelParams::exploration(2.0);
    let f = Perturbation::rotating(0.01);
    let tol = Tolerance::tight();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let z0 = C::new(rng.gen_range(-1.2..1.2), rng.gen_range(-0.5..0.5));
        let (t0, t1) = (0.3, 0.6);
        let Ok(zs) = integrate(Frame::Z, t0, z0, t1, &p, &f, tol) else { continue };
        for fr in [Frame::W, Frame::P] {
            let x0 = to_frame(fr, t0, z0).unwrap();
            let xs = integrate(fr, t0, x0, t1, &p, &f, tol).unwrap();
            for ((t, z), (_, x)) in zs.sample(30).into_iter().zip(xs.in_frame(Frame::Z, 30).unwrap()) {
                assert!((z - x).norm() < 1e-9 * (1.0 + z.norm()), "{fr:?} t={t}");
            }
        }
    }
}

#[test]
fn process_law_periodicity_and_reversibility() {
    let p = slow();
    let f = Perturbation::sin_linear(0.001);
    let tol = Tolerance::tight();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 10 {
        let q = C::new(1.0, 0.0) + C::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
        let (Ok(a), Ok(b)) = (poincare(q, &p, &f, tol), flow_map(q, -p.beta, -p.beta + 4.0 * PI, &p, &f, tol)) else {
            continue;
        };
        let Ok(aa) = poincare(a, &p, &f, tol) else { continue };
        assert!((aa - b).norm() < 1e-8 * (1.0 + b.norm()), "{aa} {b}");
        checked += 1;
    }
    for _ in 0..20 {
        let q = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let s = rng.gen_range(-3.0..3.0);
        let d = rng.gen_range(0.0..0.5);
        let a = flow_map(q, s, s + d, &p, &f, tol).unwrap();
        let b = flow_map(q, s + 2.0 * PI, s + 2.0 * PI + d, &p, &f, tol).unwrap();
        assert!((a - b).norm() < 1e-9, "periodicity");
        let back = flow_map(a, s + d, s, &p, &f, tol).unwrap();
        assert!((back - q).norm() < 1e-9, "reversibility");
    }
}

#[test]
fn symmetry_of_the_process() {
    let p = ModelParams::exploration(2.0);
    let f0 = Perturbation::zero();
    let tol = Tolerance::tight();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let z = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.3..0.3));
        let tau = rng.gen_range(-3.0..3.0);
        let d = rng.gen_range(0.0..0.3);
        let a = flow_map(z, tau, tau + d, &p, &f0, tol).unwrap();
        let b = flow_map(-z, tau + PI, tau + PI + d, &p, &f0, tol).unwrap();
        assert!((-a - b).norm() < 1e-9 * (1.0 + a.norm()), "{a} {b}");
    }
}

#[test]
fn events() {
    let tol = Tolerance::tight();
    let seg = integrate_fn(|_, x| x, 0.0, C::new(0.5, 0.0), 1.5, tol, None).unwrap();
    let unit = AxisBox { name: "box".into(), re: (-1.0, 1.0), im: (-1.0, 1.0) };
    let ev = detect_events(&seg, &[&unit]);
    assert_eq!(ev.len(), 1);
    assert_eq!(ev[0].face, "right");
    assert_eq!(ev[0].direction, Direction::Exiting);
    assert!((ev[0].t - LN_2).abs() < 1e-9, "{}", ev[0].t - LN_2);

    // Straight line through K2 in the w-plane.
    let p = ModelParams::default();
    let k = NamedRegion { tag: RegionTag::K, params: p };
    let line = integrate_fn(|_, _| C::new(0.01, 0.0), 0.0, C::new(0.0, 0.0), 2.0, tol, None).unwrap();
    let ev = detect_events(&line, &[&k]);
    assert_eq!(ev.len(), 1);
    assert_eq!(ev[0].face, "K2");
    assert_eq!(ev[0].direction, Direction::Exiting);
    assert!((ev[0].t - 1.1).abs() < 1e-9);

    let u = NamedRegion { tag: RegionTag::U, params: ModelParams::exploration(2.0) };
    let still = integrate(Frame::Z, 0.0, C::new(1.0, 0.0), 2.0 * PI, &u.params, &Perturbation::zero(), tol).unwrap();
    assert!(detect_events(&still, &[&u]).is_empty());
}

#[test]
fn periodic_orbits() {
    let p = ModelParams::exploration(2.0);
    let tol = Tolerance::default();
    let f0 = Perturbation::zero();
    assert_eq!(find_periodic(C::new(1.0, 0.0), &p, &f0, tol).unwrap(), C::new(1.0, 0.0));
    assert_eq!(find_periodic(C::new(-1.0, 0.0), &p, &f0, tol).unwrap(), C::new(-1.0, 0.0));
    let f = Perturbation::rotating(0.01 * p.r / 100.0);
    let tight = Tolerance::tight();
    let orbit = find_periodic_orbit(C::new(1.0, 0.0), &p, &f, tight).unwrap();
    assert!((orbit.q - 1.0).norm() < 0.02, "{}", orbit.q);
    assert!(orbit.defect < 1e-9);
    assert_eq!(find_periodic(C::new(1.0, 0.0), &p, &f, tight).unwrap(), orbit.q);
    let m = orbit.nodes.len();
    for (j, x) in orbit.nodes.iter().enumerate() {
        let t0 = -p.beta + 2.0 * PI * j as f64 / m as f64;
        let y = flow_map(*x, t0, t0 + 2.0 * PI / m as f64, &p, &f, tight).unwrap();
        assert!((y - orbit.nodes[(j + 1) % m]).norm() < 1e-9);
    }
    // Mirror fixed point near -1.
    let o2 = find_periodic_orbit(C::new(-1.0, 0.0), &p, &f, tight).unwrap();
    assert!((o2.q + 1.0).norm() < 0.02, "{}", o2.q);
}

#[test]
fn failures_are_reported() {
    let p = ModelParams::default();
    let f0 = Perturbation::zero();
    let e = integrate(Frame::Z, 0.0, C::new(1.5, 0.5), 1.0, &p, &f0, Tolerance::default()).unwrap_err();
    assert!(matches!(e, FlowError::BlowUp { .. }), "{e}");
    let bad = Tolerance { rtol: 0.0, atol: 1e-12 };
    assert_eq!(integrate(Frame::Z, 0.0, C::new(0.0, 0.0), 1.0, &p, &f0, bad).unwrap_err(), FlowError::ToleranceNotMet);
    assert!(integrate(Frame::Diff, 0.0, C::new(0.0, 0.0), 1.0, &p, &f0, Tolerance::default()).is_err());
}

#[test]
fn csv_round_trip() {
    let p = ModelParams::exploration(2.0);
    let seg = integrate(Frame::W, 0.0, C::new(0.01, 0.0), 0.5, &p, &Perturbation::zero(), Tolerance::default()).unwrap();
    let rows = parse_orbit_csv(&seg.to_csv(10)).unwrap();
    assert_eq!(rows.len(), 11);
    for ((t, x), (t2, x2, tag)) in seg.sample(10).into_iter().zip(rows) {
        assert_eq!(t, t2);
        assert_eq!(x, x2);
        assert_eq!(tag, "w");
    }
    assert!(growth_estimate(&p, 1.0) > 54.0);
}
