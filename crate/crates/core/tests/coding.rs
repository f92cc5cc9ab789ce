use num_complex::Complex;
use wazcode::coding::*;
use wazcode::connect::shoot;
use wazcode::flow::taylor::taylor_integrate_partial;
use wazcode::flow::{Tolerance, DOMAIN_RADIUS};
use wazcode::model::{ModelParams, Perturbation};
use wazcode::mp::{Qd, Real};
use wazcode::shifts::VertexGraph;
use wazcode::Complex64;

fn p2() -> ModelParams {
    ModelParams::exploration(2.0)
}

#[test]
fn equilibria() {
    let p = p2();
    let f = Perturbation::zero();
    let tol = Tolerance::default();
    for (q, sym, class) in [(1.0, "0", WindowClass::C00), (-1.0, "1", WindowClass::C11)] {
        let it = code_orbit(Complex64::new(q, 0.0), -5, 5, &p, &f, tol).unwrap();
        assert_eq!(it.symbols, sym.repeat(11));
        assert_eq!((it.k_min, it.k_max()), (-5, 5));
        assert!(!it.truncated);
        assert!(it.classes.iter().all(|&c| c == class));
        let mp = code_orbit_mp(Complex::new(Qd::from_f64(q), Qd::from_f64(0.0)), -5, 5, &p).unwrap();
        assert_eq!(mp.symbols, it.symbols);
        let rep = check_semiconjugacy(Complex64::new(q, 0.0), 2, -3, 3, &p, &f, tol).unwrap();
        assert!(rep.pass);
        assert!(rep.steps.iter().all(|s| s.mismatches.is_empty() && s.compared > 0));
    }
}

#[test]
fn symbol_rule_and_json() {
    for (c, s) in [(WindowClass::C00, Some(0)), (WindowClass::C10, Some(0)), (WindowClass::C11, Some(1)), (WindowClass::C01, Some(1))] {
        assert_eq!(c.symbol(), s);
        assert_eq!(c.swapped().swapped(), c);
        assert_ne!(c.swapped().symbol(), s);
    }
    assert_eq!(WindowClass::Unclassified.symbol(), None);
    let p = p2();
    let it = code_orbit(Complex64::new(1.0, 0.0), -1, 2, &p, &Perturbation::zero(), Tolerance::default()).unwrap();
    let back = Itinerary::from_json(&it.to_json()).unwrap();
    assert_eq!(back, it);
    assert!(it.to_json().contains("\"C00\""));
    assert!(it.matches(&[0, 0], 1));
    assert!(matches!(code_orbit(Complex64::new(1.0, 0.0), 2, 1, &p, &Perturbation::zero(), Tolerance::default()), Err(CodingError::EmptyRange { .. })));
}

#[test]
fn generic_points_are_unclassified() {
    let p = p2();
    let it = code_orbit(Complex64::new(0.3, 0.4), -3, 3, &p, &Perturbation::zero(), Tolerance::default()).unwrap();
    assert!(it.truncated);
    assert!(!it.stopped_at.is_empty());
    for k in it.k_min..=it.k_max() {
        assert!(it.symbol(k).is_some());
    }
}

#[test]
fn shot_orbit_codes_its_word() {
    let p = p2();
    let g = VertexGraph::default_candidate();
    let shot = shoot(&[0, 1, 0, 1], &g, 2, 6, &p, &Perturbation::zero()).unwrap();
    let r = &shot.report;
    assert!(r.reproduces);
    let it = code_orbit_mp(shot.q, r.k_lo, r.k_hi, &p).unwrap();
    let word_start = it.symbols.find("0101").map(|i| it.k_min + i as i64);
    assert!(word_start.is_some(), "{}", it.symbols);
    // Exactly one class per window and a U to W passage where the symbol changes.
    for k in it.k_min..it.k_max() {
        let (a, b) = (it.symbol(k).unwrap(), it.symbol(k + 1).unwrap());
        if a == 0 && b == 1 {
            assert_eq!(it.class(k + 1), Some(WindowClass::C01));
        }
        if a == 1 && b == 0 {
            assert_eq!(it.class(k + 1), Some(WindowClass::C10));
        }
    }
    let rep = check_semiconjugacy_mp(shot.q, 2, r.k_lo, r.k_hi, &p).unwrap();
    assert!(rep.pass, "{:?}", rep.steps);
}

#[test]
fn symmetry_swaps_classes() {
    let p = p2();
    let g = VertexGraph::default_candidate();
    let shot = shoot(&[0, 1], &g, 2, 4, &p, &Perturbation::zero()).unwrap();
    let (lo, hi) = (-2i64, 3i64);
    let a = orbit_mp(shot.q, lo, hi, &p);
    // The mirrored orbit starts half a period later at -q.
    let pi = Qd::pi();
    let t0 = -Qd::from_f64(p.beta) + pi;
    let mq = Complex::new(-shot.q.re, -shot.q.im);
    let (forward, _) = taylor_integrate_partial(t0, mq, t0 + pi * Qd::from_i64(hi + 1), p.r, DOMAIN_RADIUS);
    let (backward, _) = taylor_integrate_partial(t0, mq, t0 + pi * Qd::from_i64(lo), p.r, DOMAIN_RADIUS);
    let b = TwoSided { backward, forward };
    let mut nontrivial = 0;
    for k in lo..=hi {
        let ca = classify_window(&a, k, &p).unwrap();
        let cb = classify_window(&b, k + 1, &p).unwrap();
        assert_eq!(cb, ca.swapped(), "window {k}");
        if matches!(ca, WindowClass::C01 | WindowClass::C10) {
            nontrivial += 1;
        }
    }
    assert!(nontrivial > 0);
}
