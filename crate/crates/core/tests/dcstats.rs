use wazcode::dcstats::*;
use wazcode::flow::Tolerance;
use wazcode::model::{ModelParams, Perturbation};
use wazcode::shifts::SymbolSequence;
use wazcode::Complex64;

const N: usize = 1 << 16;

/// `k` grown one step at a time until `x[i-k..=i+k] != y[i-k..=i+k]`.
fn brute_k(pair: &SymbolPair, i: i64) -> Option<i64> {
    for m in 0..RESOLUTION {
        if (i - m..=i + m).any(|j| pair.x.get(j) != pair.y.get(j)) {
            return Some(m);
        }
    }
    None
}

fn brute_counts(pair: &SymbolPair, t: f64, n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 0u64;
    for i in 0..n as i64 {
        let d = brute_k(pair, i).map_or(0.0, |k| 0.5f64.powi(k as i32));
        c += (d < t) as u64;
        out.push(c);
    }
    out
}

/// Extremes of `c[n-1] / n` over the tail by exact rational comparison.
fn brute_extremes(c: &[u64], start: usize) -> ((u64, u64), (u64, u64)) {
    let mut lo = (c[start - 1], start as u64);
    let mut hi = lo;
    for n in start..=c.len() {
        let q = (c[n - 1], n as u64);
        if q.0 * lo.1 < lo.0 * q.1 {
            lo = q;
        }
        if q.0 * hi.1 > hi.0 * q.1 {
            hi = q;
        }
    }
    (lo, hi)
}

#[test]
fn xi_count_matches_enumeration_on_four_power_pair() {
    let pair = four_power_pair(N);
    let c = brute_counts(&pair, 0.5, N);
    assert_eq!(xi_count(&pair, 0.5, N) as u64, c[N - 1]);
    for n in [1, 5, 21, 85, 341, 1365, 5461, 21845, N] {
        assert_eq!(xi_count(&pair, 0.5, n) as u64, c[n - 1], "n = {n}");
    }
}

#[test]
fn four_power_proxies_match_oracle() {
    let pair = four_power_pair(N);
    let est = estimate_F(&pair, &[0.5], N, 1.0 / 64.0);
    let c = brute_counts(&pair, 0.5, N);
    let stored: Vec<u64> = est.counts[0].iter().map(|&v| v as u64).collect();
    assert_eq!(stored, c);
    let (lo, hi) = brute_extremes(&c, est.tail_start);
    assert_eq!((est.lower[0].count, est.lower[0].n), lo);
    assert_eq!((est.upper[0].count, est.upper[0].n), hi);
    assert!((est.lower[0].value - 0.2).abs() < 0.01, "{:?}", est.lower[0]);
    assert!((est.upper[0].value - 0.8).abs() < 0.01, "{:?}", est.upper[0]);
}

#[test]
fn double_exponential_proxies_tend_to_extremes() {
    let n = double_exponential_span(5);
    let pair = double_exponential_pair(n);
    let est = estimate_F(&pair, &[0.5], n, 1.0 / 256.0);
    let c = brute_counts(&pair, 0.5, n);
    let (lo, hi) = brute_extremes(&c, est.tail_start);
    assert_eq!((est.lower[0].count, est.lower[0].n), lo);
    assert_eq!((est.upper[0].count, est.upper[0].n), hi);
    // One more block pushes the lower proxy down and the upper one up.
    let m = double_exponential_span(4);
    let small = estimate_F(&pair, &[0.5], m, 0.0);
    assert!(est.lower[0].value < small.lower[0].value.max(0.06));
    assert!(est.upper[0].value > 0.99);
    assert!(est.lower[0].value < 0.06);
}

#[test]
fn verdicts_on_example_pairs() {
    let grid = symbolic_thresholds();
    let same = SymbolPair::new(SymbolSequence::constant(0), SymbolSequence::constant(0), 4096);
    let r = dc1_pair_report(&same, &grid, 4096, 0.5);
    assert_eq!(r.verdict, Verdict::Inconsistent);
    assert_eq!(r.lower_vanishes, Condition::Fails);

    let p = ModelParams::exploration(2.0);
    let fixed = PlanarPair::from_poincare(
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
        1000,
        &p,
        &Perturbation::zero(),
        Tolerance::default(),
    )
    .unwrap();
    let r = dc1_pair_report(&fixed, &planar_thresholds(), 1000, 0.5);
    assert_eq!(r.verdict, Verdict::Inconsistent);
    assert_eq!(r.upper_is_one, Condition::Fails);

    let n = double_exponential_span(5);
    let witness = double_exponential_pair(n);
    let r = dc1_pair_report(&witness, &grid, n, 1.0 / 256.0);
    assert_eq!(r.verdict, Verdict::ConsistentWithDc1, "{}", r.to_json());
    assert_eq!(Dc1Report::from_json(&r.to_json()).unwrap(), r);
}

#[test]
fn csv_round_trip() {
    let pair = four_power_pair(2048);
    let est = estimate_F(&pair, &symbolic_thresholds(), 2048, 0.5);
    let rows = parse_csv(&est.to_csv(64)).unwrap();
    assert_eq!(rows.len(), est.thresholds.len() * 32);
    for (t, n, v) in rows {
        let j = est.thresholds.iter().position(|&s| s == t).unwrap();
        assert_eq!(v, est.running_average(j, n));
    }
}

#[test]
fn large_threshold_gives_one() {
    let x: Vec<Complex64> = (0..1000).map(|i| Complex64::from_polar(0.5, i as f64)).collect();
    let y: Vec<Complex64> = (0..1000).map(|i| Complex64::from_polar(0.3, 2.0 * i as f64)).collect();
    let pair = PlanarPair::new(x, y);
    let diam = pair.diameter();
    let est = estimate_F(&pair, &[diam * 1.01], 1000, 0.5);
    assert_eq!(est.lower[0].value, 1.0);
    assert_eq!(est.upper[0].value, 1.0);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn xi_bounds_and_monotone(core in proptest::collection::vec(0u8..2, 0..200), t in 0.001f64..1.0, n in 1usize..300) {
            let pair = SymbolPair::new(SymbolSequence::constant(0), SymbolSequence::with_zero_tails(&core, -3), 300);
            let c = xi_count(&pair, t, n);
            prop_assert!(c <= n);
            prop_assert!(xi_count(&pair, t * 2.0, n) >= c);
            if n < 300 {
                prop_assert!(xi_count(&pair, t, n + 1) >= c);
            }
            let est = estimate_F(&pair, &[t, 2.0 * t], 300, 0.3);
            for j in 0..2 {
                prop_assert!(est.lower[j].value <= est.upper[j].value);
                prop_assert!((0.0..=1.0).contains(&est.lower[j].value));
            }
            prop_assert!(est.lower[0].value <= est.lower[1].value);
            prop_assert!(est.upper[0].value <= est.upper[1].value);
        }
    }
}
