//! Interval verification of the scalar boundary inequalities, and the
//! Riccati comparison equation.

use crate::flow::{integrate_fn, FlowError, Tolerance};
use crate::model::ModelParams;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};
use thiserror::Error;

/// Closed interval with outward-rounded arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[inline]
fn down(x: f64) -> f64 {
    if x.is_finite() {
        x.next_down()
    } else {
        x
    }
}

#[inline]
fn up(x: f64) -> f64 {
    if x.is_finite() {
        x.next_up()
    } else {
        x
    }
}

/// Rounded value `v` of a true result `v + e`, where only the sign of `e`
/// is used. Results near the underflow range are widened unconditionally.
#[inline]
fn lower(v: f64, e: f64) -> f64 {
    if v != 0.0 && v.abs() < 1e-290 || e < 0.0 || e.is_nan() {
        down(v)
    } else {
        v
    }
}

#[inline]
fn upper(v: f64, e: f64) -> f64 {
    if v != 0.0 && v.abs() < 1e-290 || e > 0.0 || e.is_nan() {
        up(v)
    } else {
        v
    }
}

/// `a + b` with its exact rounding error.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `a / b` and a value with the sign of `a / b - q`.
#[inline]
fn div_err(a: f64, b: f64) -> (f64, f64) {
    let q = a / b;
    (q, (-q).mul_add(b, a) * b.signum())
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn hull(self, o: Interval) -> Interval {
        Interval { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi) }
    }

    pub fn split(self) -> (Interval, Interval) {
        let m = self.mid();
        (Interval { lo: self.lo, hi: m }, Interval { lo: m, hi: self.hi })
    }

    pub fn sqr(self) -> Interval {
        let a = self.lo.abs();
        let b = self.hi.abs();
        let (mn, mx) = if self.lo <= 0.0 && self.hi >= 0.0 { (0.0, a.max(b)) } else { (a.min(b), a.max(b)) };
        let (l, el) = two_prod(mn, mn);
        let (h, eh) = two_prod(mx, mx);
        Interval { lo: lower(l, el).max(0.0), hi: upper(h, eh) }
    }

    pub fn sqrt(self) -> Interval {
        let root = |x: f64| {
            let r = x.max(0.0).sqrt();
            (r, (-r).mul_add(r, x.max(0.0)))
        };
        let (l, el) = root(self.lo);
        let (h, eh) = root(self.hi);
        Interval { lo: lower(l, el).max(0.0), hi: upper(h, eh) }
    }

    /// Enclosure from endpoint evaluation of a monotone function, widened by
    /// two ulps to absorb libm error.
    fn monotone(self, f: fn(f64) -> f64, increasing: bool) -> Interval {
        let (a, b) = if increasing { (f(self.lo), f(self.hi)) } else { (f(self.hi), f(self.lo)) };
        // Exact at the origin: sin 0 = tan 0 = 0, cos 0 = exp 0 = 1.
        let exact = |x: f64| x == 0.0;
        let (xa, xb) = if increasing { (self.lo, self.hi) } else { (self.hi, self.lo) };
        Interval {
            lo: if exact(xa) { a } else { down(down(a)) },
            hi: if exact(xb) { b } else { up(up(b)) },
        }
    }

    /// Sine, monotone on `[-pi/2, pi/2]`; wider arguments get `[-1, 1]`.
    pub fn sin(self) -> Interval {
        if self.lo >= -std::f64::consts::FRAC_PI_2 && self.hi <= std::f64::consts::FRAC_PI_2 {
            self.monotone(f64::sin, true)
        } else {
            Interval::new(-1.0, 1.0)
        }
    }

    /// Cosine, monotone on `[0, pi]`.
    pub fn cos(self) -> Interval {
        if self.lo >= 0.0 && self.hi <= std::f64::consts::PI {
            self.monotone(f64::cos, false)
        } else if self.hi <= 0.0 && self.lo >= -std::f64::consts::PI {
            self.monotone(f64::cos, true)
        } else {
            Interval::new(-1.0, 1.0)
        }
    }

    /// Tangent on `[0, pi/2)`.
    pub fn tan(self) -> Interval {
        assert!(self.lo >= 0.0 && self.hi < std::f64::consts::FRAC_PI_2);
        self.monotone(f64::tan, true)
    }

    pub fn exp(self) -> Interval {
        let r = self.monotone(f64::exp, true);
        Interval { lo: r.lo.max(0.0), hi: r.hi }
    }

    pub fn scale(self, c: f64) -> Interval {
        self * Interval::point(c)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        let (l, el) = two_sum(self.lo, o.lo);
        let (h, eh) = two_sum(self.hi, o.hi);
        Interval { lo: lower(l, el), hi: upper(h, eh) }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        let (l, el) = two_sum(self.lo, -o.hi);
        let (h, eh) = two_sum(self.hi, -o.lo);
        Interval { lo: lower(l, el), hi: upper(h, eh) }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

/// Hull of rounded candidates `(value, error sign)`.
fn bounds(c: &[(f64, f64)]) -> Interval {
    let lo = c.iter().map(|&(v, e)| lower(v, e)).fold(f64::INFINITY, f64::min);
    let hi = c.iter().map(|&(v, e)| upper(v, e)).fold(f64::NEG_INFINITY, f64::max);
    Interval { lo, hi }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let c = [two_prod(self.lo, o.lo), two_prod(self.lo, o.hi), two_prod(self.hi, o.lo), two_prod(self.hi, o.hi)];
        bounds(&c)
    }
}

impl Div for Interval {
    type Output = Interval;
    fn div(self, o: Interval) -> Interval {
        assert!(o.lo > 0.0 || o.hi < 0.0, "division by an interval containing zero");
        let c = [div_err(self.lo, o.lo), div_err(self.lo, o.hi), div_err(self.hi, o.lo), div_err(self.hi, o.hi)];
        bounds(&c)
    }
}

fn pt(x: f64) -> Interval {
    Interval::point(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Undecided,
}

impl Verdict {
    /// PASS only if both pass; any FAIL wins.
    pub fn merge(self, o: Verdict) -> Verdict {
        match (self, o) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
            _ => Verdict::Undecided,
        }
    }
}

/// How `N` ranges over the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "range", rename_all = "snake_case")]
pub enum NRange {
    Absolute(Interval),
    /// `N = s * R / 100` for `s` in the interval.
    FractionOfRmax(Interval),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    #[serde(rename = "R")]
    pub r: Interval,
    #[serde(rename = "N")]
    pub n: NRange,
    pub a: Interval,
    pub beta: Interval,
}

impl ParamBox {
    pub fn point(p: &ModelParams) -> Self {
        ParamBox { r: pt(p.r), n: NRange::Absolute(pt(p.n)), a: pt(p.a), beta: pt(p.beta) }
    }

    /// `R in [r_lo, r_hi]`, `N in [0, R/100]`, default `a` and `beta`.
    pub fn theorem_range(r_lo: f64, r_hi: f64, beta: f64) -> Self {
        ParamBox {
            r: Interval::new(r_lo, r_hi),
            n: NRange::FractionOfRmax(Interval::new(0.0, 1.0)),
            a: pt(0.7),
            beta: pt(beta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    Negative,
    Positive,
    NonNegative,
}

impl Claim {
    fn holds(self, e: Interval) -> bool {
        match self {
            Claim::Negative => e.hi < 0.0,
            Claim::Positive => e.lo > 0.0,
            Claim::NonNegative => e.lo >= 0.0,
        }
    }

    fn violated(self, e: Interval) -> bool {
        match self {
            Claim::Negative => e.lo >= 0.0,
            Claim::Positive => e.hi <= 0.0,
            Claim::NonNegative => e.hi < 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartResult {
    pub name: String,
    pub claim: Claim,
    pub verdict: Verdict,
    /// Hull of the enclosures of all accepted sub-boxes.
    pub margin: Interval,
    pub subdivisions: usize,
    /// Variable values of a violating point, when one was found.
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub id: String,
    #[serde(rename = "box")]
    pub param_box: ParamBox,
    pub verdict: Verdict,
    pub margin: Interval,
    pub subdivisions: usize,
    pub parts: Vec<PartResult>,
}

impl Certificate {
    fn from_parts(id: &str, param_box: ParamBox, parts: Vec<PartResult>) -> Self {
        let verdict = parts.iter().fold(Verdict::Pass, |v, p| v.merge(p.verdict));
        let margin = parts[0].margin;
        let subdivisions = parts.iter().map(|p| p.subdivisions).sum();
        Certificate { id: id.to_string(), param_box, verdict, margin, subdivisions, parts }
    }

    pub fn part(&self, name: &str) -> Option<&PartResult> {
        self.parts.iter().find(|p| p.name == name)
    }
}

/// Maximum bisection depth along any single axis.
pub const MAX_LEVELS: u32 = 20;
const MAX_BOXES: usize = 200_000;

/// Branch-and-bound check of `claim` for `f` over the product box `vars`.
pub fn check_chain<F>(name: &str, vars: &[Interval], claim: Claim, f: F) -> PartResult
where
    F: Fn(&[Interval]) -> Interval,
{
    let mut stack: Vec<(Vec<Interval>, Vec<u32>)> = vec![(vars.to_vec(), vec![0; vars.len()])];
    let mut margin: Option<Interval> = None;
    let mut boxes = 0usize;
    let mut undecided = false;
    let widths: Vec<f64> = vars.iter().map(|v| v.width()).collect();
    while let Some((b, levels)) = stack.pop() {
        boxes += 1;
        let e = f(&b);
        if claim.holds(e) {
            margin = Some(margin.map_or(e, |m| m.hull(e)));
            continue;
        }
        let centre: Vec<Interval> = b.iter().map(|v| pt(v.mid())).collect();
        let ec = f(&centre);
        if claim.violated(ec) {
            return PartResult {
                name: name.into(),
                claim,
                verdict: Verdict::Fail,
                margin: ec,
                subdivisions: boxes,
                witness: Some(centre.iter().map(|v| v.lo).collect()),
            };
        }
        // Widest axis relative to the original box.
        let axis = (0..b.len())
            .filter(|&i| widths[i] > 0.0 && b[i].width() > 0.0)
            .max_by(|&i, &j| (b[i].width() / widths[i]).total_cmp(&(b[j].width() / widths[j])));
        match axis {
            Some(i) if levels[i] < MAX_LEVELS && boxes < MAX_BOXES => {
                let (l, r) = b[i].split();
                let mut lv = levels.clone();
                lv[i] += 1;
                let mut bl = b.clone();
                bl[i] = l;
                let mut br = b;
                br[i] = r;
                stack.push((bl, lv.clone()));
                stack.push((br, lv));
            }
            _ => {
                undecided = true;
                margin = Some(margin.map_or(e, |m| m.hull(e)));
            }
        }
    }
    PartResult {
        name: name.into(),
        claim,
        verdict: if undecided { Verdict::Undecided } else { Verdict::Pass },
        margin: margin.unwrap_or(pt(f64::NAN)),
        subdivisions: boxes,
        witness: None,
    }
}

fn n_of(b: &ParamBox, r: Interval, s: Interval) -> Interval {
    match b.n {
        NRange::Absolute(n) => n,
        NRange::FractionOfRmax(_) => s * r.scale(0.01),
    }
}

fn n_var(b: &ParamBox) -> Interval {
    match b.n {
        NRange::Absolute(n) => n,
        NRange::FractionOfRmax(s) => s,
    }
}

/// Exit through the wedge rays: `2R sin(2 beta) - R theta^2 - theta/2 > 0`
/// for `theta in (0, 11 beta / (10 cos beta)]`, on both rays.
pub fn cert_gamma_exit(b: &ParamBox) -> Certificate {
    // theta = s * 11 beta / (10 cos beta), s in [0, 1].
    let f = |v: &[Interval]| {
        let (r, beta, s) = (v[0], v[1], v[2]);
        let theta = s * beta.scale(1.1) / beta.cos();
        r.scale(2.0) * beta.scale(2.0).sin() - r * theta.sqr() - theta.scale(0.5)
    };
    let vars = [b.r, b.beta, Interval::new(0.0, 1.0)];
    let p1 = check_chain("n1_upper_ray", &vars, Claim::Positive, f);
    // The lower ray gives the same chain after conjugation.
    let p2 = check_chain("n2_lower_ray", &vars, Claim::Positive, f);
    Certificate::from_parts("gamma_exit", *b, vec![p1, p2])
}

/// Inflow through the wedge cap:
/// `Re a (-2R + R Re a (1 + tan^2 beta) + sqrt(1 + tan^2 beta)/2) < 0`.
/// The bracket is certified negative on `Re a in [0, 11 beta/10]`; with
/// `Re a > 0` the product is negative.
pub fn cert_gamma_inward(b: &ParamBox) -> Certificate {
    let f = |v: &[Interval]| {
        let (r, beta, s) = (v[0], v[1], v[2]);
        let x = s * beta.scale(1.1);
        let sec2 = pt(1.0) + beta.tan().sqr();
        -r.scale(2.0) + r * x * sec2 + sec2.sqrt().scale(0.5)
    };
    let vars = [b.r, b.beta, Interval::new(0.0, 1.0)];
    let p = check_chain("bracket", &vars, Claim::Negative, f);
    Certificate::from_parts("gamma_inward", *b, vec![p])
}

/// Outflow on K1/K2 and inflow on K3/K4.
pub fn cert_k_faces(b: &ParamBox) -> Certificate {
    let vars = [b.r, b.beta];
    let k1 = check_chain("pomK1", &vars, Claim::Negative, |v| {
        let (r, beta) = (v[0], v[1]);
        let b4 = beta.sqr().sqr();
        -(r * (beta.scale(2.2) - beta.scale(1.1).sqr() - b4.scale(4.0))) + beta.scale(1.1) + beta.sqr().scale(2.0)
    });
    let k3 = check_chain("pomK3", &vars, Claim::Positive, |v| {
        let (r, beta) = (v[0], v[1]);
        let b2 = beta.sqr();
        r * (b2.scale(4.0) - b2.scale(1.21) - b2.sqr().scale(4.0)) - beta.scale(2.2)
    });
    Certificate::from_parts("K_faces", *b, vec![k1, k3])
}

/// Expansion in the difference frame and inflow on the diagonal faces.
pub fn cert_ktilde_expansion(b: &ParamBox) -> Certificate {
    let e = check_chain("expansion", &[b.r, b.beta], Claim::NonNegative, |v| {
        let (r, beta) = (v[0], v[1]);
        let s2 = pt(2.0).sqrt();
        let k = (pt(11.0) * s2 + pt(24.0)) / pt(10.0);
        r.scale(2.0) - pt(0.5) - r * s2 * k * beta - r
    });
    // theta * (-4R + 2R (sqrt2 theta + 24 beta/10) + 1); bracket certified.
    let d = check_chain("diagonal", &[b.r, b.beta, Interval::new(0.0, 1.0)], Claim::Negative, |v| {
        let (r, beta, s) = (v[0], v[1], v[2]);
        let theta = s * beta.scale(1.1);
        let s2 = pt(2.0).sqrt();
        -r.scale(4.0) + r.scale(2.0) * (s2 * theta + beta.scale(2.4)) + pt(1.0)
    });
    Certificate::from_parts("Ktilde_expansion", *b, vec![e, d])
}

/// Leftward drift in the strip: `N + R(-cos beta + x^2 / cos beta) < 0` for `|x| <= 0.98`.
pub fn cert_strip_leftward(b: &ParamBox) -> Certificate {
    let bx = *b;
    let f = move |v: &[Interval]| {
        let (r, ns, beta, x) = (v[0], v[1], v[2], v[3]);
        let n = n_of(&bx, r, ns);
        let cb = beta.cos();
        n + r * (-cb + x.sqr() / cb)
    };
    let vars = [b.r, n_var(b), b.beta, Interval::new(-0.98, 0.98)];
    let p = check_chain("strip", &vars, Claim::Negative, f);
    Certificate::from_parts("strip_leftward", *b, vec![p])
}

/// Runs the five certificates.
pub fn certify_all(b: &ParamBox) -> Vec<Certificate> {
    vec![cert_gamma_exit(b), cert_gamma_inward(b), cert_k_faces(b), cert_ktilde_expansion(b), cert_strip_leftward(b)]
}

/// Point evaluation of the strip bound at `Re z = x`.
pub fn strip_bound(p: &ModelParams, x: f64) -> Interval {
    let r = pt(p.r);
    let cb = pt(p.beta).cos();
    pt(p.n) + r * (-cb + pt(x).sqr() / cb)
}

/// `beta (1 - e^{-4 R beta}) (2 - beta) / (2 - beta + e^{-4 R beta})`.
pub fn zeta_tilde(p: &ModelParams) -> f64 {
    let e = (-4.0 * p.r * p.beta).exp();
    // Same value written as beta minus a positive correction.
    p.beta - p.beta * e * (3.0 - p.beta) / (2.0 - p.beta + e)
}

/// Interval enclosure of [`zeta_tilde`].
pub fn zeta_tilde_enclosure(p: &ModelParams) -> Interval {
    let b = pt(p.beta);
    let e = (pt(-4.0) * pt(p.r) * b).exp();
    b * (pt(1.0) - e) * (pt(2.0) - b) / (pt(2.0) - b + e)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiccatiError {
    #[error("R cos(beta) <= N: the comparison equation has no real equilibria")]
    DomainError,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Positive equilibrium `sqrt(cos^2 beta - (N/R) cos beta)`.
pub fn riccati_equilibrium(p: &ModelParams) -> Result<f64, RiccatiError> {
    let c = p.beta.cos();
    if p.r * c <= p.n {
        return Err(RiccatiError::DomainError);
    }
    Ok((c * c - p.n / p.r * c).sqrt())
}

/// `N - R cos beta + (R / cos beta) x^2`.
pub fn riccati_rhs(x: f64, p: &ModelParams) -> f64 {
    let c = p.beta.cos();
    p.n - p.r * c + p.r / c * x * x
}

/// The closed form evaluated as printed, with the second state argument dropped.
pub fn riccati_closed_form(t: f64, x0: f64, p: &ModelParams) -> Result<f64, RiccatiError> {
    let xs = riccati_equilibrium(p)?;
    let c = p.beta.cos();
    let sr = p.r.sqrt();
    let root = (p.r * c * c - p.n * c).sqrt();
    let den = x0 * sr + root;
    if den == 0.0 {
        return Ok(-xs);
    }
    let k = (x0 * sr - root) / den;
    let e = (2.0 * t * (p.r * p.r - p.n * p.r / c).sqrt()).exp();
    Ok(xs * (2.0 / (1.0 - k * e) - 1.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiccatiErratum {
    pub x0: f64,
    pub t: f64,
    pub closed_form: f64,
    pub integrated: f64,
    /// Which factor of the printed formula disagrees first.
    pub term: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiccatiReport {
    pub max_deviation: f64,
    pub samples: usize,
    pub agree: bool,
    pub erratum: Option<RiccatiErratum>,
}

/// Compares the closed form against adaptive integration on `t in [0, t_end]`.
pub fn riccati_check(p: &ModelParams, x0s: &[f64], t_end: f64, tol: f64) -> Result<RiccatiReport, RiccatiError> {
    let xs = riccati_equilibrium(p)?;
    let mut worst: f64 = 0.0;
    let mut erratum = None;
    let mut samples = 0;
    let rhs = |_t: f64, x: Complex64| Complex64::new(riccati_rhs(x.re, p), 0.0);
    for &x0 in x0s {
        let seg = integrate_fn(rhs, 0.0, Complex64::new(x0, 0.0), t_end, Tolerance { rtol: 1e-13, atol: 1e-15 }, None)?;
        for i in 0..=50 {
            let t = t_end * i as f64 / 50.0;
            let num = seg.point(t).re;
            let cf = riccati_closed_form(t, x0, p)?;
            let d = (num - cf).abs();
            samples += 1;
            if d > worst {
                worst = d;
            }
            if d > tol && erratum.is_none() {
                // Distinguish the equilibrium factor from the transient factor.
                let term = if (riccati_closed_form(0.0, xs, p)? - xs).abs() > tol {
                    "equilibrium prefactor"
                } else if (riccati_closed_form(0.0, x0, p)? - x0).abs() > tol {
                    "initial ratio"
                } else {
                    "exponential rate"
                };
                erratum = Some(RiccatiErratum { x0, t, closed_form: cf, integrated: num, term: term.into() });
            }
        }
    }
    Ok(RiccatiReport { max_deviation: worst, samples, agree: erratum.is_none(), erratum })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_encloses() {
        let a = Interval::new(0.1, 0.2);
        let s = a.sin();
        assert!(s.lo <= 0.1f64.sin() && 0.2f64.sin() <= s.hi);
        let p = Interval::new(-1.0, 2.0) * Interval::new(-3.0, 0.5);
        assert!(p.lo <= -6.0 && p.hi >= 3.0);
        assert_eq!(Interval::new(-2.0, 1.0).sqr().lo, 0.0);
    }

    #[test]
    fn verdict_merge() {
        assert_eq!(Verdict::Pass.merge(Verdict::Pass), Verdict::Pass);
        assert_eq!(Verdict::Pass.merge(Verdict::Undecided), Verdict::Undecided);
        assert_eq!(Verdict::Undecided.merge(Verdict::Fail), Verdict::Fail);
    }
}
