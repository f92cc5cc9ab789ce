//! Distance-distribution statistics for orbit pairs.
//!
//! `xi_count` counts the iterates at which two orbits are closer than a
//! threshold. `estimate_F` turns the running averages of that count into
//! finite-horizon proxies for the lower and upper distribution functions:
//! the minimum and maximum of the running average over a tail window.
//! These are proxies, nothing more; a verdict from `dc1_pair_report` is
//! evidence about a finite stretch of two orbits.

use crate::flow::{poincare, FlowError, Tolerance};
use crate::model::{ModelParams, Perturbation};
use crate::shifts::SymbolSequence;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Distances are resolved down to `2^-RESOLUTION`; closer symbolic pairs
/// report distance 0.
pub const RESOLUTION: i64 = 64;

pub const MARGIN: f64 = 0.05;

/// Two orbits of the same map sampled at iterates `0..len()`.
pub trait OrbitPair: Sync {
    fn len(&self) -> usize;

    /// `rho(f^i x, f^i y)` for `i < n`.
    fn distances(&self, n: usize) -> Vec<f64>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pair of Poincare orbits in the plane, Euclidean metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarPair {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl PlanarPair {
    pub fn new(x: Vec<Complex64>, y: Vec<Complex64>) -> Self {
        PlanarPair { x, y }
    }

    /// Iterates the period map from `x0` and `y0`.
    pub fn from_poincare(
        x0: Complex64,
        y0: Complex64,
        n: usize,
        p: &ModelParams,
        f: &Perturbation,
        tol: Tolerance,
    ) -> Result<Self, FlowError> {
        let orbit = |mut q: Complex64| -> Result<Vec<Complex64>, FlowError> {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                out.push(q);
                q = poincare(q, p, f, tol)?;
            }
            Ok(out)
        };
        Ok(PlanarPair { x: orbit(x0)?, y: orbit(y0)? })
    }

    /// Diameter of the union of both orbits.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<&Complex64> = self.x.iter().chain(&self.y).collect();
        let mut d: f64 = 0.0;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                d = d.max((*a - *b).norm());
            }
        }
        d
    }
}

impl OrbitPair for PlanarPair {
    fn len(&self) -> usize {
        self.x.len().min(self.y.len())
    }

    fn distances(&self, n: usize) -> Vec<f64> {
        assert!(n <= self.len(), "orbit pair holds {} iterates, {} requested", self.len(), n);
        self.x.iter().zip(&self.y).take(n).map(|(a, b)| (a - b).norm()).collect()
    }
}

/// Pair of bi-infinite sequences under the shift, with
/// `rho(x, y) = 2^-k`, `k = min { m >= 0 : x[-m..=m] != y[-m..=m] }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolPair {
    pub x: SymbolSequence,
    pub y: SymbolSequence,
    /// Number of shift iterates considered available.
    pub len: usize,
}

impl SymbolPair {
    pub fn new(x: SymbolSequence, y: SymbolSequence, len: usize) -> Self {
        SymbolPair { x, y, len }
    }
}

impl OrbitPair for SymbolPair {
    fn len(&self) -> usize {
        self.len
    }

    fn distances(&self, n: usize) -> Vec<f64> {
        assert!(n <= self.len, "orbit pair holds {} iterates, {} requested", self.len, n);
        // k(i) is the distance from i to the nearest disagreement.
        let lo = -RESOLUTION;
        let hi = n as i64 + RESOLUTION;
        let m = (hi - lo) as usize;
        let differ: Vec<bool> = (lo..hi).map(|i| self.x.get(i) != self.y.get(i)).collect();
        let mut near = vec![i64::MAX; m];
        let mut last = None;
        for j in 0..m {
            if differ[j] {
                last = Some(j);
            }
            if let Some(l) = last {
                near[j] = (j - l) as i64;
            }
        }
        last = None;
        for j in (0..m).rev() {
            if differ[j] {
                last = Some(j);
            }
            if let Some(l) = last {
                near[j] = near[j].min((l - j) as i64);
            }
        }
        (0..n)
            .map(|i| {
                let k = near[(i as i64 - lo) as usize];
                if k >= RESOLUTION {
                    0.0
                } else {
                    (-k as f64).exp2()
                }
            })
            .collect()
    }
}

/// Pair agreeing everywhere except on the odd-numbered blocks, where the
/// second sequence carries 1s. Block `j` has length `lengths[j]`; both
/// sequences are 0 outside the blocks.
pub fn block_pair(lengths: &[usize], len: usize) -> SymbolPair {
    let mut core = Vec::new();
    for (j, &l) in lengths.iter().enumerate() {
        core.extend(std::iter::repeat(if j % 2 == 0 { 0 } else { 1 }).take(l));
        if core.len() >= len {
            break;
        }
    }
    let x = SymbolSequence::constant(0);
    let y = SymbolSequence::with_zero_tails(&core, 0);
    SymbolPair::new(x, y, len)
}

/// Block lengths `4^j`, near on even blocks and far on odd ones.
pub fn four_power_pair(len: usize) -> SymbolPair {
    let mut lengths = Vec::new();
    let (mut total, mut l) = (0usize, 1usize);
    while total < len {
        lengths.push(l);
        total += l;
        l *= 4;
    }
    block_pair(&lengths, len)
}

/// Block lengths `2^(2^j)`. The pair covers whole blocks up to `len`.
pub fn double_exponential_pair(len: usize) -> SymbolPair {
    let mut lengths = Vec::new();
    let mut total = 0usize;
    let mut e = 1u32;
    while total < len {
        let l = 1usize.checked_shl(e).expect("block length overflows");
        lengths.push(l);
        total += l;
        e *= 2;
    }
    block_pair(&lengths, len)
}

/// Total length of the first `blocks` double-exponential blocks.
pub fn double_exponential_span(blocks: u32) -> usize {
    (0..blocks).map(|j| 1usize << (1u32 << j)).sum()
}

/// `#{ i : rho(f^i x, f^i y) < t, 0 <= i < n }`.
pub fn xi_count(pair: &dyn OrbitPair, t: f64, n: usize) -> usize {
    pair.distances(n).into_iter().filter(|&d| d < t).count()
}

/// Running value `count / n` with the integer count kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proxy {
    pub count: u64,
    pub n: u64,
    pub value: f64,
}

impl Proxy {
    fn new(count: u64, n: u64) -> Self {
        Proxy { count, n, value: count as f64 / n as f64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionEstimate {
    pub thresholds: Vec<f64>,
    pub n_max: usize,
    pub tail_fraction: f64,
    pub tail_start: usize,
    /// `counts[j][n - 1] = xi(x, y, thresholds[j], n)`.
    pub counts: Vec<Vec<u32>>,
    /// Minimum of the running average over the tail, per threshold.
    pub lower: Vec<Proxy>,
    /// Maximum of the running average over the tail, per threshold.
    pub upper: Vec<Proxy>,
}

impl DistributionEstimate {
    pub fn running_average(&self, j: usize, n: usize) -> f64 {
        self.counts[j][n - 1] as f64 / n as f64
    }

    /// Rows `threshold,n,running_average` for every `stride`-th n and n_max.
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut s = String::from("threshold,n,running_average\n");
        for (j, &t) in self.thresholds.iter().enumerate() {
            for n in (1..=self.n_max).filter(|n| n % stride == 0 || *n == self.n_max) {
                writeln!(s, "{:.17e},{},{:.17e}", t, n, self.running_average(j, n)).unwrap();
            }
        }
        s
    }
}

/// Parses the CSV of `DistributionEstimate::to_csv`; `#` lines are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<(f64, usize, f64)>, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next() != Some("threshold,n,running_average") {
        return Err("missing header".into());
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            if v.len() != 3 {
                return Err(format!("bad row {l}"));
            }
            let e = |x: &str| format!("bad field {x}");
            Ok((v[0].parse().map_err(|_| e(v[0]))?, v[1].parse().map_err(|_| e(v[1]))?, v[2].parse().map_err(|_| e(v[2]))?))
        })
        .collect()
}

/// Geometric grid `2^lo, 2^(lo+1), ..., 2^hi`.
pub fn geometric_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

pub fn planar_thresholds() -> Vec<f64> {
    geometric_grid(-10, 1)
}

pub fn symbolic_thresholds() -> Vec<f64> {
    geometric_grid(-10, 0)
}

#[allow(non_snake_case)]
pub fn estimate_F(pair: &dyn OrbitPair, thresholds: &[f64], n_max: usize, tail_fraction: f64) -> DistributionEstimate {
    assert!(n_max >= 1, "n_max must be positive");
    let d = pair.distances(n_max);
    let tail_start = ((tail_fraction * n_max as f64).ceil() as usize).clamp(1, n_max);
    let mut counts = Vec::with_capacity(thresholds.len());
    let mut lower = Vec::with_capacity(thresholds.len());
    let mut upper = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let mut c = Vec::with_capacity(n_max);
        let mut acc = 0u32;
        for &di in &d {
            acc += (di < t) as u32;
            c.push(acc);
        }
        let mut lo = Proxy::new(c[tail_start - 1] as u64, tail_start as u64);
        let mut hi = lo;
        for n in tail_start..=n_max {
            let q = Proxy::new(c[n - 1] as u64, n as u64);
            // Compare count/n exactly through cross-multiplication.
            if q.count * lo.n < lo.count * q.n {
                lo = q;
            }
            if q.count * hi.n > hi.count * q.n {
                hi = q;
            }
        }
        counts.push(c);
        lower.push(lo);
        upper.push(hi);
    }
    DistributionEstimate { thresholds: thresholds.to_vec(), n_max, tail_fraction, tail_start, counts, lower, upper }
}

/// Estimates for several pairs at once.
pub fn estimate_many(pairs: &[&dyn OrbitPair], thresholds: &[f64], n_max: usize, tail_fraction: f64) -> Vec<DistributionEstimate> {
    pairs.par_iter().map(|p| estimate_F(*p, thresholds, n_max, tail_fraction)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "consistent-with-DC1")]
    ConsistentWithDc1,
    #[serde(rename = "inconsistent")]
    Inconsistent,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    Holds,
    Fails,
    Unclear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dc1Report {
    pub verdict: Verdict,
    /// Some threshold with vanishing lower proxy.
    pub lower_vanishes: Condition,
    /// Upper proxy is 1 at every threshold.
    pub upper_is_one: Condition,
    pub witness_threshold: Option<f64>,
    pub worst_upper_threshold: Option<f64>,
    pub margin: f64,
    pub note: String,
    pub estimate_summary: Vec<(f64, Proxy, Proxy)>,
}

impl Dc1Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Margin test: within `margin` holds, beyond `2 margin` fails, otherwise
/// unclear.
fn grade(gap: f64, margin: f64) -> Condition {
    if gap <= margin {
        Condition::Holds
    } else if gap > 2.0 * margin {
        Condition::Fails
    } else {
        Condition::Unclear
    }
}

pub fn dc1_from_estimate(est: &DistributionEstimate, margin: f64) -> Dc1Report {
    let (mut best, mut best_t) = (f64::INFINITY, None);
    let (mut worst, mut worst_t) = (f64::INFINITY, None);
    for (j, &t) in est.thresholds.iter().enumerate() {
        if est.lower[j].value < best {
            best = est.lower[j].value;
            best_t = Some(t);
        }
        if est.upper[j].value < worst {
            worst = est.upper[j].value;
            worst_t = Some(t);
        }
    }
    let c1 = grade(best, margin);
    let c2 = grade(1.0 - worst, margin);
    let verdict = match (c1, c2) {
        (Condition::Holds, Condition::Holds) => Verdict::ConsistentWithDc1,
        (Condition::Fails, _) | (_, Condition::Fails) => Verdict::Inconsistent,
        _ => Verdict::Inconclusive,
    };
    Dc1Report {
        verdict,
        lower_vanishes: c1,
        upper_is_one: c2,
        witness_threshold: best_t,
        worst_upper_threshold: worst_t,
        margin,
        note: format!(
            "finite-horizon evidence: proxies are min/max of the running average over n in [{}, {}]",
            est.tail_start, est.n_max
        ),
        estimate_summary: est.thresholds.iter().enumerate().map(|(j, &t)| (t, est.lower[j], est.upper[j])).collect(),
    }
}

pub fn dc1_pair_report(pair: &dyn OrbitPair, s_grid: &[f64], n_max: usize, tail_fraction: f64) -> Dc1Report {
    dc1_from_estimate(&estimate_F(pair, s_grid, n_max, tail_fraction), MARGIN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbolic_distance_levels() {
        let x = SymbolSequence::constant(0);
        let y = SymbolSequence::with_zero_tails(&[1], 3);
        let d = SymbolPair::new(x, y, 8).distances(8);
        assert_eq!(d, vec![0.125, 0.25, 0.5, 1.0, 0.5, 0.25, 0.125, 0.0625]);
    }

    #[test]
    fn identical_and_far() {
        let x = SymbolSequence::constant(1);
        let same = SymbolPair::new(x.clone(), x, 100);
        assert_eq!(xi_count(&same, 1e-12, 100), 100);
        let far = PlanarPair::new(vec![Complex64::new(1.0, 0.0); 50], vec![Complex64::new(-1.0, 0.0); 50]);
        assert_eq!(xi_count(&far, 1.0, 50), 0);
        assert_eq!(xi_count(&far, 2.5, 50), 50);
    }

    #[test]
    fn block_layout() {
        let p = four_power_pair(30);
        let ys: Vec<u8> = (0..26).map(|i| p.y.get(i)).collect();
        let mut want = vec![0u8];
        want.extend([1; 4]);
        want.extend([0; 16]);
        want.extend([1; 5]);
        assert_eq!(ys, want);
        assert_eq!(double_exponential_span(3), 2 + 4 + 16);
    }
}
