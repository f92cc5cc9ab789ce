//! Window-by-window classification of orbits and the 0/1 coding map.
//!
//! Window `k` is the elapsed interval `[k pi, (k + 1) pi]` from the start
//! time `-beta`, i.e. absolute times `[k pi - beta, (k + 1) pi - beta]`.

use crate::flow::taylor::{taylor_integrate_partial, TaylorOrbit};
use crate::flow::{integrate_partial, poincare, FlowError, OrbitSegment, Tolerance, DOMAIN_RADIUS};
use crate::geometry::{member_q, RegionTag};
use crate::model::{Frame, ModelParams, Perturbation};
use crate::mp::{Qd, Real};
use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Samples per window, not counting the switch time.
pub const SAMPLES: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodingError {
    #[error("orbit does not cover window {k}")]
    NotCovered { k: i64 },
    #[error("empty window range [{lo}, {hi}]")]
    EmptyRange { lo: i64, hi: i64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WindowClass {
    C00,
    C11,
    C01,
    C10,
    #[serde(rename = "UNCLASSIFIED")]
    Unclassified,
}

impl WindowClass {
    pub fn symbol(self) -> Option<u8> {
        match self {
            WindowClass::C00 | WindowClass::C10 => Some(0),
            WindowClass::C11 | WindowClass::C01 => Some(1),
            WindowClass::Unclassified => None,
        }
    }

    /// Exchanges the roles of `U` and `W`.
    pub fn swapped(self) -> Self {
        match self {
            WindowClass::C00 => WindowClass::C11,
            WindowClass::C11 => WindowClass::C00,
            WindowClass::C01 => WindowClass::C10,
            WindowClass::C10 => WindowClass::C01,
            WindowClass::Unclassified => WindowClass::Unclassified,
        }
    }
}

/// Anything that yields z-frame points at absolute times.
pub trait ZOrbit {
    /// Covered time interval as `(lo, hi)`.
    fn span(&self) -> (f64, f64);
    fn z(&self, t: f64) -> Complex64;
}

impl ZOrbit for OrbitSegment {
    fn span(&self) -> (f64, f64) {
        (self.t0.min(self.t1), self.t0.max(self.t1))
    }
    fn z(&self, t: f64) -> Complex64 {
        let x = self.point(t);
        match self.frame {
            Some(Frame::Z) | None => x,
            Some(fr) => crate::model::from_frame(fr, t, x).unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
        }
    }
}

impl<T: Real> ZOrbit for TaylorOrbit<T> {
    fn span(&self) -> (f64, f64) {
        let (a, b) = (self.t0.to_f64(), self.t1.to_f64());
        (a.min(b), a.max(b))
    }
    fn z(&self, t: f64) -> Complex64 {
        self.point_f64(t)
    }
}

/// A backward and a forward piece glued at their common start time.
pub struct TwoSided<O> {
    pub backward: O,
    pub forward: O,
}

impl<O: ZOrbit> ZOrbit for TwoSided<O> {
    fn span(&self) -> (f64, f64) {
        (self.backward.span().0, self.forward.span().1)
    }
    fn z(&self, t: f64) -> Complex64 {
        if t < self.forward.span().0 {
            self.backward.z(t)
        } else {
            self.forward.z(t)
        }
    }
}

/// Absolute start time of window `k`.
pub fn window_start(k: i64, p: &ModelParams) -> f64 {
    k as f64 * PI - p.beta
}

fn inside(region: RegionTag, t: f64, z: Complex64, p: &ModelParams) -> bool {
    z.re.is_finite() && z.im.is_finite() && member_q(region, t, z, p).is_ok_and(|m| m.is_closed_member())
}

/// Which of the four window conditions hold; more than one, or none, gives
/// `Unclassified`.
pub fn window_conditions(orbit: &dyn ZOrbit, k: i64, p: &ModelParams) -> Result<[bool; 4], CodingError> {
    let t0 = window_start(k, p);
    let t1 = t0 + PI;
    let (lo, hi) = orbit.span();
    let slack = 1e-9 * (1.0 + t1.abs());
    if lo > t0 + slack || hi < t1 - slack {
        return Err(CodingError::NotCovered { k });
    }
    let ts = k as f64 * PI + p.gamma;
    let mut times: Vec<f64> = (0..=SAMPLES).map(|i| t0 + PI * i as f64 / SAMPLES as f64).collect();
    times.push(ts);
    times.sort_by(f64::total_cmp);
    let pts: Vec<(f64, Complex64)> = times.iter().map(|&t| (t, orbit.z(t.clamp(lo, hi)))).collect();
    let all_in = |r: RegionTag, a: f64, b: f64| pts.iter().filter(|(t, _)| *t >= a && *t <= b).all(|(t, z)| inside(r, *t, *z, p));
    let (u, w) = (RegionTag::U, RegionTag::W);
    let c00 = all_in(u, t0, t1);
    let c11 = all_in(w, t0, t1);
    let corridor = all_in(RegionTag::Z, t0, ts);
    let c01 = inside(u, t0, pts[0].1, p) && corridor && all_in(w, ts, t1);
    let c10 = inside(w, t0, pts[0].1, p) && corridor && all_in(u, ts, t1);
    Ok([c00, c11, c01, c10])
}

pub fn classify_window(orbit: &dyn ZOrbit, k: i64, p: &ModelParams) -> Result<WindowClass, CodingError> {
    let c = window_conditions(orbit, k, p)?;
    if c.iter().filter(|&&b| b).count() != 1 {
        return Ok(WindowClass::Unclassified);
    }
    Ok([WindowClass::C00, WindowClass::C11, WindowClass::C01, WindowClass::C10][c.iter().position(|&b| b).unwrap()])
}

/// Symbols over a contiguous range of classified windows. Coding stops at
/// the first unclassified (or uncovered) window on either side of 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub k_min: i64,
    pub symbols: String,
    pub classes: Vec<WindowClass>,
    /// Requested range.
    pub requested: (i64, i64),
    /// Set when coding stopped before the requested range was exhausted.
    pub truncated: bool,
    /// Windows where coding stopped.
    pub stopped_at: Vec<i64>,
}

impl Itinerary {
    pub fn k_max(&self) -> i64 {
        self.k_min + self.classes.len() as i64 - 1
    }

    pub fn symbol(&self, k: i64) -> Option<u8> {
        if k < self.k_min || k > self.k_max() {
            return None;
        }
        self.classes[(k - self.k_min) as usize].symbol()
    }

    pub fn class(&self, k: i64) -> Option<WindowClass> {
        if k < self.k_min || k > self.k_max() {
            return None;
        }
        Some(self.classes[(k - self.k_min) as usize])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("itinerary serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Whether `word` appears at `start`.
    pub fn matches(&self, word: &[u8], start: i64) -> bool {
        word.iter().enumerate().all(|(i, &s)| self.symbol(start + i as i64) == Some(s))
    }
}

/// Codes the windows `lo..=hi` of an orbit, moving outward from the window
/// nearest to 0.
pub fn code_windows(orbit: &dyn ZOrbit, lo: i64, hi: i64, p: &ModelParams) -> Result<Itinerary, CodingError> {
    if lo > hi {
        return Err(CodingError::EmptyRange { lo, hi });
    }
    let pivot = 0i64.clamp(lo, hi);
    let class = |k: i64| classify_window(orbit, k, p).unwrap_or(WindowClass::Unclassified);
    let mut stopped_at = Vec::new();
    let mut up = Vec::new();
    for k in pivot..=hi {
        let c = class(k);
        if c == WindowClass::Unclassified {
            stopped_at.push(k);
            break;
        }
        up.push(c);
    }
    let mut down = Vec::new();
    if up.len() as i64 > 0 || pivot == lo {
        for k in (lo..pivot).rev() {
            let c = class(k);
            if c == WindowClass::Unclassified {
                stopped_at.push(k);
                break;
            }
            down.push(c);
        }
    }
    let k_min = pivot - down.len() as i64;
    down.reverse();
    down.extend(up);
    let symbols = down.iter().filter_map(|c| c.symbol()).map(|s| char::from(b'0' + s)).collect();
    stopped_at.sort_unstable();
    Ok(Itinerary { k_min, symbols, classes: down, requested: (lo, hi), truncated: !stopped_at.is_empty(), stopped_at })
}

/// Integrates from `(-beta, q)` over the windows `lo..=hi` and codes them.
/// The orbit is stopped at `|z| = 3`; windows past that are unclassified.
pub fn code_orbit(q: Complex64, lo: i64, hi: i64, p: &ModelParams, f: &Perturbation, tol: Tolerance) -> Result<Itinerary, CodingError> {
    if lo > hi {
        return Err(CodingError::EmptyRange { lo, hi });
    }
    let t0 = -p.beta;
    let t_hi = window_start(hi.max(-1) + 1, p);
    let t_lo = window_start(lo.min(0), p);
    let (fwd, _) = integrate_partial(Frame::Z, t0, q, t_hi, p, f, tol, DOMAIN_RADIUS)?;
    let (back, _) = integrate_partial(Frame::Z, t0, q, t_lo, p, f, tol, DOMAIN_RADIUS)?;
    code_windows(&TwoSided { backward: back, forward: fwd }, lo, hi, p)
}

/// Taylor orbit through `(-beta, q)` spanning the windows `lo..=hi`.
pub fn orbit_mp<T: Real>(q: Complex<T>, lo: i64, hi: i64, p: &ModelParams) -> TwoSided<TaylorOrbit<T>> {
    let t0 = -T::from_f64(p.beta);
    let pi = T::pi();
    let t_hi = t0 + pi * T::from_i64(hi.max(-1) + 1);
    let t_lo = t0 + pi * T::from_i64(lo.min(0));
    let (forward, _) = taylor_integrate_partial(t0, q, t_hi, p.r, DOMAIN_RADIUS);
    let (backward, _) = taylor_integrate_partial(t0, q, t_lo, p.r, DOMAIN_RADIUS);
    TwoSided { backward, forward }
}

/// [`code_orbit`] for the unperturbed equation in extended precision.
pub fn code_orbit_mp<T: Real>(q: Complex<T>, lo: i64, hi: i64, p: &ModelParams) -> Result<Itinerary, CodingError> {
    if lo > hi {
        return Err(CodingError::EmptyRange { lo, hi });
    }
    code_windows(&orbit_mp(q, lo, hi, p), lo, hi, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconjugacyStep {
    pub step: usize,
    /// Windows compared (classified in both itineraries).
    pub compared: usize,
    pub mismatches: Vec<i64>,
    /// `|P^j(q) - z(-beta + 2 pi j)|` between the iterated map and the
    /// orbit of `q`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconjugacyReport {
    pub base: Itinerary,
    pub steps: Vec<SemiconjugacyStep>,
    pub pass: bool,
    /// Largest `deviation` over the steps.
    pub max_deviation: f64,
}

fn compare_shifted(base: &Itinerary, image: &Itinerary, j: usize) -> (usize, Vec<i64>) {
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for k in image.k_min..=image.k_max() {
        let kk = k + 2 * j as i64;
        if let (Some(a), Some(b)) = (image.symbol(k), base.symbol(kk)) {
            compared += 1;
            if a != b {
                mismatches.push(kk);
            }
        }
    }
    (compared, mismatches)
}

fn finish(base: Itinerary, steps: Vec<SemiconjugacyStep>) -> SemiconjugacyReport {
    let pass = steps.iter().all(|s| s.compared > 0 && s.mismatches.is_empty());
    let max_deviation = steps.iter().map(|s| s.deviation).fold(0.0, f64::max);
    SemiconjugacyReport { base, steps, pass, max_deviation }
}

/// Checks `code(P^j q)_k = code(q)_{k + 2j}` for `j = 1..=n_steps` on the
/// windows `lo..=hi` of `q`.
pub fn check_semiconjugacy(
    q: Complex64,
    n_steps: usize,
    lo: i64,
    hi: i64,
    p: &ModelParams,
    f: &Perturbation,
    tol: Tolerance,
) -> Result<SemiconjugacyReport, CodingError> {
    let base = code_orbit(q, lo, hi.max(lo + 2 * n_steps as i64), p, f, tol)?;
    let t0 = -p.beta;
    let long = integrate_partial(Frame::Z, t0, q, t0 + 2.0 * PI * n_steps as f64, p, f, tol, DOMAIN_RADIUS)?.0;
    let mut steps = Vec::new();
    let mut qj = q;
    for j in 1..=n_steps {
        qj = poincare(qj, p, f, tol)?;
        let sh = 2 * j as i64;
        let image = code_orbit(qj, lo - sh, hi - sh, p, f, tol)?;
        let (compared, mismatches) = compare_shifted(&base, &image, j);
        let deviation = (qj - long.point(t0 + 2.0 * PI * j as f64)).norm();
        steps.push(SemiconjugacyStep { step: j, compared, mismatches, deviation });
    }
    Ok(finish(base, steps))
}

/// [`check_semiconjugacy`] for the unperturbed equation with quad-double
/// orbits, as needed for points of the invariant set whose both tails are
/// unstable in `f64`.
pub fn check_semiconjugacy_mp(q: Complex<Qd>, n_steps: usize, lo: i64, hi: i64, p: &ModelParams) -> Result<SemiconjugacyReport, CodingError> {
    let base_orbit = orbit_mp(q, lo, hi.max(2 * n_steps as i64), p);
    let base = code_windows(&base_orbit, lo, hi, p)?;
    let t0 = -Qd::from_f64(p.beta);
    let mut steps = Vec::new();
    let mut qj = q;
    for j in 1..=n_steps {
        let two_pi = Qd::pi().mul_f64(2.0);
        let t_start = t0 + two_pi * Qd::from_i64(j as i64 - 1);
        let (orb, err) = taylor_integrate_partial(t_start, qj, t_start + two_pi, p.r, DOMAIN_RADIUS);
        if let Some(e) = err {
            return Err(e.into());
        }
        let next = orb.end();
        let d = base_orbit.z(-p.beta + 2.0 * PI * j as f64);
        qj = next;
        let sh = 2 * j as i64;
        let image = code_orbit_mp(qj, lo - sh, hi - sh, p)?;
        let (compared, mismatches) = compare_shifted(&base, &image, j);
        let deviation = (Complex64::new(qj.re.to_f64(), qj.im.to_f64()) - d).norm();
        steps.push(SemiconjugacyStep { step: j, compared, mismatches, deviation });
    }
    Ok(finish(base, steps))
}
