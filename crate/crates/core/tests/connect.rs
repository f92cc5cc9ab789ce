use std::f64::consts::PI;
use wazcode::coding::{classify_window, code_orbit_mp, WindowClass};
use wazcode::connect::*;
use wazcode::flow::{integrate_fn, integrate_partial, Tolerance};
use wazcode::geometry::{member, Face, Membership, RegionTag};
use wazcode::model::{field_in, Frame, ModelParams, Perturbation};
use wazcode::mp::{Qd, Real};
use wazcode::shifts::{SymbolSequence, VertexGraph};
use wazcode::Complex64;

fn params() -> ModelParams {
    ModelParams::exploration(2.0)
}

#[test]
fn unstable_fiber_decays_backward() {
    let mut p = params();
    p.beta = 0.01;
    let f = Perturbation::zero();
    // At R = 2 the fiber slope is about -0.063, so o = 0.005 lands above the
    // box height 2 beta^2 and has no bracket.
    assert!(matches!(unstable_fiber(0.005, 0.0, &p, &f, 5.0), Err(ConnectError::NoBracket { .. })));
    let o = 0.0025;
    let fp = unstable_fiber(o, 0.0, &p, &f, 5.0).unwrap();
    assert!(fp.bracket < 1e-11);
    // Backward in time is forward in the reversed frame.
    let rhs = |s: f64, a: Complex64| field_in(Frame::What, s, a, &p, &f).unwrap();
    let orb = integrate_fn(rhs, 0.0, Complex64::new(o, fp.xi), 5.0, Tolerance::tight(), None).unwrap();
    let samples = orb.sample(400);
    let mut prev = f64::INFINITY;
    for (_, a) in &samples {
        let r = a.norm();
        if r < 1e-6 {
            break;
        }
        assert!(r <= prev * (1.0 + 1e-9), "not monotone: {r} after {prev}");
        prev = r;
    }
    assert!(samples.last().unwrap().1.norm() < 1e-6);
}

#[test]
fn track_one_window_on_the_field() {
    let p = params();
    let f = Perturbation::zero();
    let b = p.beta;
    let ku = kappa_u(p.r);
    let rhs = |t: f64, w: Complex64| field_in(Frame::W, t, w, &p, &f).unwrap();
    let curve = |o: f64| Complex64::new(o, ku * o);
    let bx = TrackBox { hx: 1.1 * b, hy: 2.0 * b * b };
    let (t0, t1) = (-b, PI - b);
    let ti = track_curve(&curve, (-1.1 * b, 1.1 * b), t0, t1, &rhs, bx, Tolerance::tight()).unwrap();
    assert!(ti.mu < 0.0 && 0.0 < ti.nu);
    let image = |o: f64| integrate_fn(rhs, t0, curve(o), t1, Tolerance::tight(), None).unwrap().end();
    assert_eq!(member(RegionTag::K, t1, image(ti.mu), &p).unwrap(), Membership::Boundary(Face::Left));
    assert_eq!(member(RegionTag::K, t1, image(ti.nu), &p).unwrap(), Membership::Boundary(Face::Right));
    let mid = 0.5 * (ti.mu + ti.nu);
    let (orb, err) = integrate_partial(Frame::W, t0, curve(mid), t1, &p, &f, Tolerance::tight(), 3.0).unwrap();
    assert!(err.is_none());
    assert_eq!(classify_window(&orb, 0, &p).unwrap(), WindowClass::C00);
}

#[test]
fn zero_word_cascade_is_degenerate() {
    let p = params();
    let seq = SymbolSequence::constant(0);
    let c = cascade(&seq, -2, 2, &p, &Perturbation::zero()).unwrap();
    assert!(c.is_nested());
    assert!(c.symbols.iter().all(|&s| s == 0));
    let shot = shoot_sequence(&seq, -2, 2, &p, &Perturbation::zero()).unwrap();
    assert!((shot.q_f64() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    assert!(shot.report.itinerary.classes.iter().all(|&c| c == WindowClass::C00));
}

#[test]
fn one_word_mirrors_zero_word() {
    let p = params();
    let shot = shoot_sequence(&SymbolSequence::constant(1), -2, 2, &p, &Perturbation::zero()).unwrap();
    assert!((shot.q_f64() + Complex64::new(1.0, 0.0)).norm() < 1e-12);
    assert!(shot.report.itinerary.classes.iter().all(|&c| c == WindowClass::C11));
}

#[test]
fn word_0101_classifies_along_the_word() {
    let p = params();
    let shot = shoot(&[0, 1, 0, 1], &VertexGraph::default_candidate(), 1, 0, &p, &Perturbation::zero()).unwrap();
    let r = &shot.report;
    assert!(r.reproduces, "{} vs {}", r.itinerary.symbols, r.expected);
    assert!(r.nested);
    let it = &r.itinerary;
    for i in 0..4i64 {
        let k = r.start + i;
        let want = match (it.symbol(k - 1).unwrap(), it.symbol(k).unwrap()) {
            (0, 0) => WindowClass::C00,
            (1, 1) => WindowClass::C11,
            (0, 1) => WindowClass::C01,
            _ => WindowClass::C10,
        };
        assert_eq!(it.class(k), Some(want), "window {k}");
    }
}

#[test]
fn shot_report_round_trips_and_recodes() {
    let p = params();
    let shot = shoot(&[1], &VertexGraph::default_candidate(), 1, 0, &p, &Perturbation::zero()).unwrap();
    let r = &shot.report;
    let back = ShotReport::from_json(&r.to_json()).unwrap();
    assert_eq!(&back, r);
    let q = num_complex::Complex::new(Qd::parse(&back.q_re_full).unwrap(), Qd::parse(&back.q_im_full).unwrap());
    let d = (q.re - shot.q.re).to_f64().abs() + (q.im - shot.q.im).to_f64().abs();
    assert!(d < 1e-60);
    let it = code_orbit_mp(q, back.k_lo, back.k_hi, &p).unwrap();
    assert_eq!(it.symbols, back.expected);
    assert!(r.unstable_residual < 1e-6 && r.stable_residual < 1e-6);
}

#[test]
fn inadmissible_and_perturbed_are_refused() {
    let p = params();
    let g = VertexGraph::default_candidate();
    assert!(matches!(shoot(&[1, 0, 0, 1], &g, 1, 0, &p, &Perturbation::zero()), Err(ConnectError::NotAdmissible(_))));
    assert!(matches!(
        shoot(&[1], &g, 1, 0, &p, &Perturbation::rotating(0.01)),
        Err(ConnectError::Unsupported(_))
    ));
}
