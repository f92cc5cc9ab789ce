//! Acceptance criteria 1-9. Each criterion prints one PASS/FAIL line to
//! stderr; the test fails if any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::{E, PI};
use std::io::Write;
use std::time::{Duration, Instant};
use wazcode::certify::*;
use wazcode::coding::{check_semiconjugacy_mp, code_orbit_mp, WindowClass};
use wazcode::connect::{shoot, shoot_sequence, track_curve, TrackBox};
use wazcode::dcstats::{
    dc1_pair_report, double_exponential_pair, double_exponential_span, estimate_F, four_power_pair, planar_thresholds,
    symbolic_thresholds, PlanarPair, Verdict as DcVerdict, RESOLUTION,
};
use wazcode::flow::{flow_map, integrate_partial, poincare, Tolerance};
use wazcode::model::{from_frame, to_frame, Frame, ModelParams, Perturbation};
use wazcode::shifts::{graph_entropy, place_word, SymbolSequence, VertexGraph};
use wazcode::Complex64;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rounds_to(x: f64, printed: &str) -> bool {
    let expect: f64 = printed.parse().unwrap();
    let decimals = printed.split('.').nth(1).map_or(0, |d| d.len()) as i32;
    (x - expect).abs() <= 0.5 * 10f64.powi(-decimals)
}

fn equilibria_and_symmetry() -> Outcome {
    let f0 = Perturbation::zero();
    let tol = Tolerance::tight();
    let mut worst: f64 = 0.0;
    for r in [1.0, 2.0, 5.0] {
        let p = ModelParams::exploration(r);
        for q in [1.0, -1.0] {
            let e = (poincare(Complex64::new(q, 0.0), &p, &f0, tol).map_err(|e| e.to_string())? - q).norm();
            check(e < 1e-9, format!("poincare({q}) at R={r} off by {e:e}"))?;
        }
    }
    // 100 points: 5 start times x 5 points x 4 durations.
    let p = ModelParams::exploration(2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..5 {
        let tau = -PI + 2.0 * PI * i as f64 / 5.0;
        for _ in 0..5 {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5));
            for d in [0.05, 0.1, 0.2, 0.4] {
                let (Ok(a), Ok(b)) = (flow_map(z, tau, tau + d, &p, &f0, tol), flow_map(-z, tau + PI, tau + PI + d, &p, &f0, tol))
                else {
                    return Err(format!("orbit from {z} at {tau} left the domain"));
                };
                let e = (a + b).norm() / (1.0 + a.norm());
                worst = worst.max(e);
            }
        }
    }
    check(worst < 1e-8, format!("symmetry defect {worst:e}"))?;
    Ok(format!("symmetry defect {worst:.1e}"))
}

/// Frames are compared while the orbit stays in `|z| < 3`, the domain where
/// the hypotheses on the equation are imposed.
fn frame_consistency() -> Outcome {
    let p = ModelParams::exploration(2.0);
    let f0 = Perturbation::zero();
    let tol = Tolerance::tight();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let points: Vec<Complex64> = (0..50)
        .map(|_| Complex64::from_polar(2.0 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let (t0, t1) = (0.0, 2.0 * PI);
    let res: Vec<Result<(f64, f64), String>> = points
        .par_iter()
        .map(|&z0| {
            let mut segs = Vec::new();
            for fr in [Frame::Z, Frame::W, Frame::P] {
                let x0 = to_frame(fr, t0, z0).unwrap();
                let (seg, _) = integrate_partial(fr, t0, x0, t1, &p, &f0, tol, 3.0).map_err(|e| e.to_string())?;
                segs.push(seg);
            }
            let end = segs.iter().map(|s| s.t1).fold(t1, f64::min);
            let mut worst: f64 = 0.0;
            for i in 0..=400 {
                let t = t0 + (end - t0) * i as f64 / 400.0;
                let z = segs[0].point(t);
                for s in &segs[1..] {
                    let x = from_frame(s.frame.unwrap(), t, s.point(t)).unwrap();
                    worst = worst.max((x - z).norm() / (1.0 + z.norm()));
                }
            }
            Ok((worst, end - t0))
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut spans = Vec::new();
    for r in res {
        let (w, span) = r?;
        worst = worst.max(w);
        spans.push(span);
    }
    let full = spans.iter().filter(|&&s| s >= t1 - t0).count();
    let mean = spans.iter().sum::<f64>() / spans.len() as f64;
    check(worst < 1e-8, format!("largest frame disagreement {worst:e}"))?;
    Ok(format!("max disagreement {worst:.1e}; {full}/50 orbits stay in |z|<3 for the full period, mean span {mean:.2}"))
}

fn certificates() -> Outcome {
    let p = ModelParams::certification(100.0, 1.0).map_err(|e| e.to_string())?;
    let certs = certify_all(&ParamBox::point(&p));
    for c in &certs {
        check(c.verdict == Verdict::Pass, format!("{} is {:?}", c.id, c.verdict))?;
    }
    let part = |id: &str, name: &str| certs.iter().find(|c| c.id == id).and_then(|c| c.part(name)).unwrap().margin;
    let k1 = part("K_faces", "pomK1").hi;
    let k3 = part("K_faces", "pomK3").lo;
    let strip = strip_bound(&p, 0.0).mid();
    let zt = zeta_tilde(&p);
    check(rounds_to(k1, "-2.1767"), format!("pomK1 {k1}"))?;
    check(rounds_to(k3, "0.00590"), format!("pomK3 {k3}"))?;
    check(rounds_to(strip, "-98.995"), format!("strip {strip}"))?;
    check(rounds_to(zt, "0.0097273"), format!("zeta_tilde {zt}"))?;
    for c in certify_all(&ParamBox::theorem_range(100.0, 1000.0, 0.01)) {
        check(c.verdict == Verdict::Pass, format!("{} over the box is {:?}", c.id, c.verdict))?;
    }
    Ok(format!("pomK1 {k1:.4} pomK3 {k3:.5} strip {strip:.3} zeta {zt:.7}"))
}

fn riccati() -> Outcome {
    let p = ModelParams::default();
    let xs = riccati_equilibrium(&p).map_err(|e| e.to_string())?;
    let x0s: Vec<f64> = (0..20).map(|i| -xs / 2.0 + xs * i as f64 / 19.0).collect();
    let rep = riccati_check(&p, &x0s, 0.05, 1e-8).map_err(|e| e.to_string())?;
    match (&rep.erratum, rep.agree) {
        (None, true) => Ok(format!("closed form agrees, max deviation {:.1e}", rep.max_deviation)),
        (Some(e), false) => Ok(format!(
            "erratum: x0={:.4} t={:.4} closed form {:.6} vs integrated {:.6}, first disagreeing term: {}",
            e.x0, e.t, e.closed_form, e.integrated, e.term
        )),
        _ => Err("inconsistent report".into()),
    }
}

fn curve_tracking() -> Outcome {
    let curve = |s: f64| Complex64::new(s, 0.0);
    let rhs = |_: f64, x: Complex64| Complex64::new(x.re, -x.im);
    let ti = track_curve(&curve, (-1.0, 1.0), 0.0, 1.0, &rhs, TrackBox { hx: 1.0, hy: 1.0 }, Tolerance::tight())
        .map_err(|e| e.to_string())?;
    let e = 1.0 / E;
    check((ti.mu + e).abs() < 1e-6 && (ti.nu - e).abs() < 1e-6, format!("mu {} nu {}", ti.mu, ti.nu))?;
    Ok(format!("mu {:.9} nu {:.9}", ti.mu, ti.nu))
}

fn entropy() -> Outcome {
    let h1 = graph_entropy(&VertexGraph::full_shift(), 1).map_err(|e| e.to_string())?;
    check((h1 - 2f64.ln()).abs() < 1e-12, format!("full shift {h1}"))?;
    let h2 = graph_entropy(&VertexGraph::default_candidate(), 2).map_err(|e| e.to_string())?;
    let exact = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    check((h2 - exact).abs() < 1e-9, format!("default graph {h2}"))?;
    Ok(format!("ln 2 = {h1:.12}; default p=2: {h2:.12} = ln {:.6}", h2.exp()))
}

fn end_to_end_shooting() -> Outcome {
    let p = ModelParams::exploration(2.0);
    let f0 = Perturbation::zero();
    let g = VertexGraph::default_candidate();
    let words: Vec<Vec<u8>> = (1..=4usize)
        .flat_map(|n| (0..1u32 << n).map(move |b| (0..n).map(|i| ((b >> (n - 1 - i)) & 1) as u8).collect::<Vec<u8>>()))
        .filter(|w| place_word(&g, w).is_some())
        .collect();
    let results: Vec<Result<(), String>> = words
        .par_iter()
        .map(|w| {
            let name: String = w.iter().map(|s| char::from(b'0' + s)).collect();
            let shot = shoot(w, &g, 1, 9, &p, &f0).map_err(|e| format!("{name}: {e}"))?;
            let r = &shot.report;
            let it = code_orbit_mp(shot.q, r.k_lo, r.k_hi, &p).map_err(|e| format!("{name}: {e}"))?;
            check(it.matches(w, r.start), format!("{name}: coded {} from {}", it.symbols, it.k_min))?;
            let sc = check_semiconjugacy_mp(shot.q, 4, r.k_lo, r.k_hi, &p).map_err(|e| format!("{name}: {e}"))?;
            check(sc.pass, format!("{name}: semiconjugacy fails"))
        })
        .collect();
    let failed: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    check(failed.is_empty(), failed.join("; "))?;
    Ok(format!("{} admissible words reproduced, semiconjugacy over 4 steps", words.len()))
}

fn heteroclinic() -> Outcome {
    let p = ModelParams::exploration(2.0);
    let seq = SymbolSequence { left: vec![0], core: vec![], right: vec![1], start: 0 };
    let shot = shoot_sequence(&seq, -4, 4, &p, &Perturbation::zero()).map_err(|e| e.to_string())?;
    let r = &shot.report;
    let (lo, hi) = (-8, 8);
    let it = code_orbit_mp(shot.q, lo, hi, &p).map_err(|e| e.to_string())?;
    check(!it.truncated, format!("coding stopped at {:?}", it.stopped_at))?;
    for k in lo..=-3 {
        check(it.class(k) == Some(WindowClass::C00), format!("window {k}: {:?}", it.class(k)))?;
    }
    for k in 3..=hi {
        check(it.class(k) == Some(WindowClass::C11), format!("window {k}: {:?}", it.class(k)))?;
    }
    check(r.unstable_residual < 1e-4 && r.stable_residual < 1e-4, format!("fiber residuals {:e} {:e}", r.unstable_residual, r.stable_residual))?;
    Ok(format!(
        "windows {lo}..{hi}: {}; fiber residuals {:.1e} / {:.1e}",
        it.symbols, r.unstable_residual, r.stable_residual
    ))
}

fn brute_k(x: &SymbolSequence, y: &SymbolSequence, i: i64) -> Option<u32> {
    (0..RESOLUTION as u32).find(|&m| (-(m as i64)..=m as i64).any(|d| x.get(i + d) != y.get(i + d)))
}

fn dc_statistics() -> Outcome {
    let n_max = 4usize.pow(8);
    let pair = four_power_pair(n_max);
    let th = symbolic_thresholds();
    let est = estimate_F(&pair, &th, n_max, 1.0 / 64.0);
    // Oracle: counts and tail extremes from the definition.
    let dist: Vec<f64> = (0..n_max as i64).map(|i| brute_k(&pair.x, &pair.y, i).map_or(0.0, |k| 2f64.powi(-(k as i32)))).collect();
    for (j, &t) in th.iter().enumerate() {
        let mut c = 0u32;
        let (mut lo, mut hi) = ((1u64, 0u64), (0u64, 1u64));
        for n in 1..=n_max {
            if dist[n - 1] < t {
                c += 1;
            }
            check(est.counts[j][n - 1] == c, format!("count at t={t} n={n}"))?;
            if n >= est.tail_start {
                let v = (c as u64, n as u64);
                if v.0 * lo.1 < lo.0 * v.1 {
                    lo = v;
                }
                if v.0 * hi.1 > hi.0 * v.1 {
                    hi = v;
                }
            }
        }
        check(est.lower[j].count * lo.1 == lo.0 * est.lower[j].n, format!("lower proxy at t={t}"))?;
        check(est.upper[j].count * hi.1 == hi.0 * est.upper[j].n, format!("upper proxy at t={t}"))?;
    }
    let s = planar_thresholds();
    let v1 = dc1_pair_report(&double_exponential_pair(double_exponential_span(5)), &symbolic_thresholds(), double_exponential_span(5), 1.0 / 256.0).verdict;
    let same = PlanarPair::new(vec![Complex64::new(0.3, 0.1); 2000], vec![Complex64::new(0.3, 0.1); 2000]);
    let v2 = dc1_pair_report(&same, &s, 2000, 1.0 / 64.0).verdict;
    let p = ModelParams::exploration(2.0);
    let fixed = PlanarPair::from_poincare(Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), 1000, &p, &Perturbation::zero(), Tolerance::default())
        .map_err(|e| e.to_string())?;
    let v3 = dc1_pair_report(&fixed, &s, 1000, 1.0 / 64.0).verdict;
    check(v1 == DcVerdict::ConsistentWithDc1, format!("witness pair: {v1:?}"))?;
    check(v2 == DcVerdict::Inconsistent, format!("identical pair: {v2:?}"))?;
    check(v3 == DcVerdict::Inconsistent, format!("fixed points: {v3:?}"))?;
    Ok(format!("oracle counts match at n_max={n_max}; verdicts {v1:?}/{v2:?}/{v3:?}"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("1 equilibria and symmetry", equilibria_and_symmetry, Duration::from_secs(10)),
        ("2 frame consistency", frame_consistency, Duration::from_secs(30)),
        ("3 certificates", certificates, Duration::from_secs(5)),
        ("4 Riccati comparison", riccati, Duration::from_secs(5)),
        ("5 curve tracking", curve_tracking, Duration::from_secs(5)),
        ("6 entropy", entropy, Duration::from_secs(1)),
        ("7 end-to-end shooting", end_to_end_shooting, Duration::from_secs(600)),
        ("8 heteroclinic witness", heteroclinic, Duration::from_secs(120)),
        ("9 DC statistics", dc_statistics, Duration::from_secs(30)),
    ];
    let mut failures = Vec::new();
    let mut err = std::io::stderr();
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > budget => Err(format!("{msg}; took {took:.1?}, budget {budget:?}")),
            other => other,
        };
        let line = match &outcome {
            Ok(msg) => format!("criterion {name}: PASS ({took:.2?}) {msg}"),
            Err(msg) => format!("criterion {name}: FAIL ({took:.2?}) {msg}"),
        };
        let _ = writeln!(err, "{line}");
        if outcome.is_err() {
            failures.push(line);
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
