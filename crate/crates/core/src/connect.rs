//! Exit-side bisection: saddle fibers, curve tracking through a box, the
//! window-by-window interval cascade and the shooting of connecting orbits.
//!
//! The cascade runs in `f64` between mid-window checkpoints; the orbit it
//! locates is then refined by multiple shooting in quad-double precision so
//! that it can be followed across many windows of exponential stretching.

use crate::coding::{code_orbit_mp, orbit_mp, window_start, CodingError, Itinerary, ZOrbit};
use crate::flow::taylor::{taylor_flow_jacobian, taylor_integrate};
use crate::flow::{detect_events, integrate_partial, Dop853, FlowError, NamedRegion, Tolerance, DOMAIN_RADIUS};
use crate::geometry::{member_q, RegionTag};
use crate::model::{field_in, from_frame, to_frame, Frame, ModelParams, Perturbation};
use crate::mp::{Qd, Real};
use crate::shifts::{place_word, word_string, SymbolSequence, VertexGraph};
use nalgebra::{DMatrix, DVector};
use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConnectError {
    #[error("no bracket: both trial values exit through the {side} side ({what})")]
    NoBracket { what: String, side: String },
    #[error("tracking lost at step {step}: {reason}")]
    TrackingLost { step: usize, reason: String },
    #[error("corridor transit fails in window {window}")]
    CorridorMiss { window: i64 },
    #[error("no intersection with the stable fiber")]
    NoIntersection,
    #[error("word {0} is not admissible")]
    NotAdmissible(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("multiple shooting did not converge (defect {defect:e})")]
    NoConvergence { defect: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Coding(#[from] CodingError),
}

/// `lambda = sqrt(4R^2 - 1/4)`, the saddle exponent.
pub fn saddle_exponent(r: f64) -> f64 {
    (4.0 * r * r - 0.25).sqrt()
}

/// Slope of the unstable direction `y = kappa_u x` at `w = 0`.
pub fn kappa_u(r: f64) -> f64 {
    2.0 * (saddle_exponent(r) - 2.0 * r)
}

/// Slope of the stable direction `x = kappa_s y` at `w = 0`.
pub fn kappa_s(r: f64) -> f64 {
    -1.0 / (2.0 * (2.0 * r + saddle_exponent(r)))
}

/// The two constant solutions `+1` (W frame) and `-1` (P frame).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Saddle {
    Plus,
    Minus,
}

impl Saddle {
    pub fn of_symbol(s: u8) -> Saddle {
        if s == 0 {
            Saddle::Plus
        } else {
            Saddle::Minus
        }
    }

    pub fn frame(self) -> Frame {
        match self {
            Saddle::Plus => Frame::W,
            Saddle::Minus => Frame::P,
        }
    }

    /// Expanding coordinate: `Re w` or `Im p`.
    pub fn unstable_coord(self, x: Complex64) -> f64 {
        match self {
            Saddle::Plus => x.re,
            Saddle::Minus => x.im,
        }
    }

    /// Unstable eigenvector, normalised so that its expanding coordinate is 1.
    pub fn unstable_dir(self, r: f64) -> Complex64 {
        match self {
            Saddle::Plus => Complex64::new(1.0, kappa_u(r)),
            Saddle::Minus => Complex64::new(-kappa_s(r), 1.0),
        }
    }

    /// Linear functional vanishing on the stable direction.
    pub fn stable_functional(self, r: f64) -> (f64, f64) {
        match self {
            Saddle::Plus => (1.0, -kappa_s(r)),
            Saddle::Minus => (kappa_u(r), 1.0),
        }
    }

    fn stable_h(self, r: f64, x: Complex64) -> f64 {
        let (a, b) = self.stable_functional(r);
        a * x.re + b * x.im
    }
}

// ---------------------------------------------------------------------------
// Box exits

/// Where an orbit leaves an axis-aligned box `|Re| <= hx`, `|Im| <= hy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exit {
    Left(f64, Complex64),
    Right(f64, Complex64),
    Bottom(f64, Complex64),
    Top(f64, Complex64),
    /// Still inside at the end time.
    Stayed(Complex64),
}

fn box_g(x: Complex64, hx: f64, hy: f64) -> [f64; 4] {
    [-hx - x.re, x.re - hx, -hy - x.im, x.im - hy]
}

/// Integrates `rhs` from `(t0, x0)` to `t1` and reports the first exit from
/// the box.
pub fn run_box(
    rhs: impl Fn(f64, Complex64) -> Complex64,
    t0: f64,
    x0: Complex64,
    t1: f64,
    hx: f64,
    hy: f64,
    tol: Tolerance,
) -> Result<Exit, FlowError> {
    let mut st = Dop853::new(|t, x| rhs(t, x), t0, x0, t1, tol);
    let outside = |x: Complex64| box_g(x, hx, hy).iter().any(|&g| g > 0.0);
    if outside(x0) {
        return Ok(classify_exit(t0, x0, hx, hy));
    }
    let mut n = 0usize;
    while !st.done() {
        let piece = st.step()?;
        n += 1;
        if n > 1_000_000 {
            return Err(FlowError::MaxSteps { t: st.t });
        }
        let mut prev = piece.t_old;
        for j in 1..=8 {
            let t = piece.t_old + piece.h * j as f64 / 8.0;
            if outside(piece.eval(t)) {
                // Bisect for the first time outside.
                let (mut a, mut b) = (prev, t);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if outside(piece.eval(m)) {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                return Ok(classify_exit(b, piece.eval(b), hx, hy));
            }
            prev = t;
        }
    }
    Ok(Exit::Stayed(st.y))
}

fn classify_exit(t: f64, x: Complex64, hx: f64, hy: f64) -> Exit {
    let g = box_g(x, hx, hy);
    let i = (0..4).max_by(|&i, &j| g[i].total_cmp(&g[j])).unwrap();
    match i {
        0 => Exit::Left(t, x),
        1 => Exit::Right(t, x),
        2 => Exit::Bottom(t, x),
        _ => Exit::Top(t, x),
    }
}

// ---------------------------------------------------------------------------
// Fibers

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint {
    /// Free coordinate.
    pub o: f64,
    /// Bisected coordinate.
    pub xi: f64,
    pub horizon: f64,
    /// Final bracket width.
    pub bracket: f64,
}

/// Default horizon `min(5, 10 / R)`.
pub fn fiber_horizon(p: &ModelParams) -> f64 {
    (10.0 / p.r).min(5.0)
}

/// Bisects `y` in `[lo, hi]` on the sign returned by `side`.
fn bisect_sign(lo: f64, hi: f64, side: impl Fn(f64) -> Result<i8, ConnectError>, what: &str) -> Result<(f64, f64), ConnectError> {
    let (sl, sh) = (side(lo)?, side(hi)?);
    if sl == sh {
        let name = if sl > 0 { "positive" } else { "negative" };
        return Err(ConnectError::NoBracket { what: what.into(), side: name.into() });
    }
    let (mut a, mut b) = (lo, hi);
    // Down to adjacent floats: backward growth over the horizon is large.
    loop {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        if side(m)? == sl {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b), (b - a).abs()))
}

fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Ordinate `xi(o)` of the unstable fiber of `w = 0` at time `tau`: the
/// W-frame point `o + i xi(o)` whose backward orbit stays in `K` and tends
/// to 0. Computed in the time-reversed frame, where the exit side through
/// the top or bottom of `K` classifies trial ordinates.
pub fn unstable_fiber(o: f64, tau: f64, p: &ModelParams, f: &Perturbation, horizon: f64) -> Result<FiberPoint, ConnectError> {
    let (hx, hy) = (1.1 * p.beta, 2.0 * p.beta * p.beta);
    if o.abs() > hx * (1.0 + 1e-12) {
        return Err(ConnectError::Unsupported(format!("abscissa {o} outside [-11 beta/10, 11 beta/10]")));
    }
    let ku = kappa_u(p.r);
    let tol = Tolerance::tight();
    let side = |y: f64| -> Result<i8, ConnectError> {
        let rhs = |s: f64, a: Complex64| field_in(Frame::What, s, a, p, f).expect("what frame");
        Ok(match run_box(rhs, -tau, Complex64::new(o, y), -tau + horizon, hx, hy, tol)? {
            Exit::Top(..) => 1,
            Exit::Bottom(..) => -1,
            Exit::Left(_, x) | Exit::Right(_, x) => sign(x.im),
            // Expanding coordinate of the reversed flow at the horizon.
            Exit::Stayed(x) => sign(x.im - ku * x.re),
        })
    };
    let (xi, bracket) = bisect_sign(-hy, hy, side, "unstable fiber")?;
    Ok(FiberPoint { o, xi, horizon, bracket })
}

/// Stable fiber of a saddle at time `tau`, forward in time. For `Plus` the
/// free coordinate is `Im w = o` and `Re w` is bisected; for `Minus` the
/// free coordinate is `Re p = o` and `Im p` is bisected.
pub fn stable_fiber(saddle: Saddle, o: f64, tau: f64, p: &ModelParams, f: &Perturbation, horizon: f64) -> Result<FiberPoint, ConnectError> {
    let (long, short) = (1.1 * p.beta, 2.0 * p.beta * p.beta);
    if o.abs() > long * (1.0 + 1e-12) {
        return Err(ConnectError::Unsupported(format!("abscissa {o} outside [-11 beta/10, 11 beta/10]")));
    }
    let frame = saddle.frame();
    let tol = Tolerance::tight();
    let r = p.r;
    let side = |y: f64| -> Result<i8, ConnectError> {
        let rhs = |t: f64, x: Complex64| field_in(frame, t, x, p, f).expect("saddle frame");
        let (x0, hx, hy) = match saddle {
            Saddle::Plus => (Complex64::new(y, o), short, long),
            Saddle::Minus => (Complex64::new(o, y), long, short),
        };
        let e = run_box(rhs, tau, x0, tau + horizon, hx, hy, tol)?;
        let u = |x: Complex64| saddle.unstable_coord(x) - {
            // Remove the stable component so the sign is that of the
            // expanding coordinate.
            match saddle {
                Saddle::Plus => kappa_s(r) * x.im,
                Saddle::Minus => -kappa_u(r) * x.re,
            }
        };
        Ok(match e {
            Exit::Left(_, x) | Exit::Right(_, x) | Exit::Bottom(_, x) | Exit::Top(_, x) | Exit::Stayed(x) => sign(u(x)),
        })
    };
    let (xi, bracket) = bisect_sign(-short, short, side, "stable fiber")?;
    Ok(FiberPoint { o, xi, horizon, bracket })
}

// ---------------------------------------------------------------------------
// Curve tracking

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackStep {
    pub t: f64,
    pub mu: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedInterval {
    pub mu: f64,
    pub nu: f64,
    /// True when the lower curve parameter starts on the right face.
    pub reversed: bool,
    pub history: Vec<TrackStep>,
    /// Widest final bisection bracket.
    pub bracket: f64,
}

/// Box for [`track_curve`]: faces `K1` (left), `K2` (right), `K3`/`K4`
/// (bottom/top).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackBox {
    pub hx: f64,
    pub hy: f64,
}

const FATTEN: f64 = 0.25;
const TRACK_SAMPLES: usize = 9;

/// Follows the part of a curve that stays in the box from `t_start` to
/// `t_end`. At each intermediate time `t_i`, `mu_i` is the largest curve
/// parameter whose image has left through (or sits on) `K1` and `nu_i` the
/// smallest larger parameter on `K2`. Steps are halved until all interior
/// samples stay in the box fattened by a quarter.
pub fn track_curve(
    curve: &(dyn Fn(f64) -> Complex64 + Sync),
    range: (f64, f64),
    t_start: f64,
    t_end: f64,
    rhs: &(dyn Fn(f64, Complex64) -> Complex64 + Sync),
    bx: TrackBox,
    tol: Tolerance,
) -> Result<TrackedInterval, ConnectError> {
    let (hx, hy) = (bx.hx, bx.hy);
    let at = |s: f64, t: f64, fat: f64| run_box(rhs, t_start, curve(s), t, hx * (1.0 + fat), hy * (1.0 + fat), tol);
    let start = curve(range.0);
    let reversed = start.re > 0.0;
    let (k1_end, k2_end) = if reversed { (range.1, range.0) } else { (range.0, range.1) };
    let in_k1 = |e: &Exit| matches!(e, Exit::Left(..)) || matches!(e, Exit::Stayed(x) if x.re <= -hx);
    let in_k2 = |e: &Exit| matches!(e, Exit::Right(..)) || matches!(e, Exit::Stayed(x) if x.re >= hx);
    let mut mu = k1_end;
    let mut nu = k2_end;
    let mut history = vec![TrackStep { t: t_start, mu, nu }];
    let mut bracket: f64 = 0.0;
    let span = t_end - t_start;
    let mut t = t_start;
    let mut rho = span;
    let mut step = 0usize;
    while (t_end - t) * span.signum() > 0.0 {
        step += 1;
        let mut next;
        loop {
            next = if rho.abs() >= (t_end - t).abs() { t_end } else { t + rho };
            let ok = (1..TRACK_SAMPLES).all(|i| {
                let s = mu + (nu - mu) * i as f64 / TRACK_SAMPLES as f64;
                matches!(at(s, next, FATTEN), Ok(Exit::Stayed(_)))
            });
            if ok || rho.abs() < 1e-6 * span.abs() {
                break;
            }
            rho *= 0.5;
        }
        let k1 = |s: f64| at(s, next, 0.0).map(|e| in_k1(&e));
        let k2 = |s: f64| at(s, next, 0.0).map(|e| in_k2(&e));
        // mu: boundary between K1 (true at mu) and not-K1 (at nu).
        let (mut a, mut b) = (mu, nu);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) || m == a || m == b {
                break;
            }
            if k1(m)? {
                a = m;
            } else {
                b = m;
            }
        }
        let new_mu = a;
        bracket = bracket.max((b - a).abs());
        let (mut a, mut b) = (new_mu, nu);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) || m == a || m == b {
                break;
            }
            if k2(m)? {
                b = m;
            } else {
                a = m;
            }
        }
        let new_nu = b;
        bracket = bracket.max((b - a).abs());
        for i in 1..TRACK_SAMPLES {
            let s = new_mu + (new_nu - new_mu) * i as f64 / TRACK_SAMPLES as f64;
            if let Exit::Top(..) | Exit::Bottom(..) = at(s, next, 0.0)? {
                return Err(ConnectError::TrackingLost { step, reason: format!("parameter {s} leaves through K3/K4") });
            }
        }
        mu = new_mu;
        nu = new_nu;
        t = next;
        history.push(TrackStep { t, mu, nu });
        rho *= 2.0;
    }
    Ok(TrackedInterval { mu, nu, reversed, history, bracket })
}

// ---------------------------------------------------------------------------
// Cascade

const CHEB_NODES: usize = 24;
/// Escape radius for the exit-side classification of cascade orbits.
const SIDE_RADIUS: f64 = 1e3;
/// Uniform scan points on the curve for steps that switch saddles.
const SWITCH_SCAN: usize = 2048;

/// Barycentric Chebyshev interpolant on `[-1, 1]`.
#[derive(Debug, Clone)]
struct Cheb {
    nodes: Vec<f64>,
    values: Vec<Complex64>,
}

impl Cheb {
    fn nodes(n: usize) -> Vec<f64> {
        (0..=n).map(|k| (PI * k as f64 / n as f64).cos()).collect()
    }

    fn eval(&self, x: f64) -> Complex64 {
        let n = self.nodes.len() - 1;
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for (k, (&xk, &vk)) in self.nodes.iter().zip(&self.values).enumerate() {
            let d = x - xk;
            if d == 0.0 {
                return vk;
            }
            let mut w = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == n {
                w *= 0.5;
            }
            num += vk * (w / d);
            den += w / d;
        }
        num / den
    }
}

#[derive(Debug, Clone)]
enum Curve {
    /// `scale * s * dir` in the saddle frame at `tau`.
    Linear { tau: f64, saddle: Saddle, scale: f64, dir: Complex64 },
    Cheb(Cheb),
}

impl Curve {
    fn z(&self, s: f64) -> Complex64 {
        match self {
            Curve::Linear { tau, saddle, scale, dir } => {
                from_frame(saddle.frame(), *tau, *dir * (scale * s)).expect("saddle frame")
            }
            Curve::Cheb(c) => c.eval(s),
        }
    }
}

/// Outcome of one curve point against the target saddle's box.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    /// Inside the box at the end time; expanding coordinate.
    Value(f64),
    /// Never entered the box.
    Miss,
    /// Entered and left through the face of this sign.
    Exit(i8),
}

impl Side {
    fn sign(self) -> Option<i8> {
        match self {
            Side::Value(u) => Some(sign(u)),
            Side::Exit(s) => Some(s),
            Side::Miss => None,
        }
    }
}

/// One checkpoint-to-checkpoint step of the cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeStep {
    /// Window of the starting checkpoint.
    pub window: i64,
    pub t_from: f64,
    pub t_to: f64,
    pub from_symbol: u8,
    pub to_symbol: u8,
    /// Sub-interval of the current curve parameter in `[-1, 1]`.
    pub mu: f64,
    pub nu: f64,
    /// The same interval in the parameter of the first curve.
    pub global_mu: String,
    pub global_nu: String,
    /// Curve parameter where the expanding coordinate vanishes.
    pub centre: f64,
    /// Interpolation check of the next curve.
    pub interp_error: f64,
    /// Crossings of the faces of `Z` by the centre orbit.
    pub corridor_events: usize,
}

pub struct Cascade {
    pub steps: Vec<CascadeStep>,
    /// Checkpoint times, one more than steps.
    pub times: Vec<f64>,
    pub symbols: Vec<u8>,
    curves: Vec<Curve>,
    /// Global interval per step, `(mu, nu)`.
    pub global: Vec<(Qd, Qd)>,
}

impl Cascade {
    /// Nested global intervals: `mu_l < mu_{l+1} < nu_{l+1} < nu_l`.
    pub fn is_nested(&self) -> bool {
        let mut prev = (-Qd::ONE, Qd::ONE);
        for &(a, b) in &self.global {
            if !(prev.0 <= a && a < b && b <= prev.1) {
                return false;
            }
            prev = (a, b);
        }
        true
    }
}

/// Mid-window checkpoint `k pi - beta + pi / 2`.
pub fn checkpoint(k: i64, p: &ModelParams) -> f64 {
    window_start(k, p) + 0.5 * PI
}

struct StepCtx<'a> {
    curve: &'a Curve,
    t0: f64,
    t1: f64,
    tgt: Saddle,
    p: &'a ModelParams,
    f: &'a Perturbation,
}

impl StepCtx<'_> {
    fn flow(&self, s: f64) -> Result<(Complex64, f64, bool), ConnectError> {
        let (seg, err) = integrate_partial(Frame::Z, self.t0, self.curve.z(s), self.t1, self.p, self.f, Tolerance::tight(), SIDE_RADIUS)?;
        Ok((seg.end(), seg.t1, err.is_none()))
    }

    /// Target box: the expanding coordinate within `11 beta / 10`, the
    /// contracting one within `a`.
    fn in_target(&self, t: f64, z: Complex64) -> Option<f64> {
        let y = to_frame(self.tgt.frame(), t, z).expect("saddle frame");
        let u = self.tgt.unstable_coord(y);
        let v = match self.tgt {
            Saddle::Plus => y.im,
            Saddle::Minus => y.re,
        };
        (u.abs() <= 1.1 * self.p.beta && v.abs() <= self.p.a).then_some(u)
    }

    fn side(&self, s: f64) -> Result<Side, ConnectError> {
        let p = self.p;
        let f = self.f;
        let z0 = self.curve.z(s);
        let mut st = Dop853::new(|t, z| crate::model::field_z(t, z, p, f), self.t0, z0, self.t1, Tolerance::tight());
        let mut entered = self.in_target(self.t0, z0).is_some();
        while !st.done() {
            let piece = st.step()?;
            for j in 1..=8 {
                let t = piece.t_old + piece.h * j as f64 / 8.0;
                let z = piece.eval(t);
                if !(z.norm() < SIDE_RADIUS) {
                    return Ok(Side::Miss);
                }
                match (entered, self.in_target(t, z)) {
                    (false, Some(_)) => entered = true,
                    (true, None) => {
                        let y = to_frame(self.tgt.frame(), t, z).expect("saddle frame");
                        return Ok(Side::Exit(sign(self.tgt.unstable_coord(y))));
                    }
                    _ => {}
                }
            }
        }
        Ok(match self.in_target(self.t1, st.y) {
            Some(u) if entered => Side::Value(u),
            _ => Side::Miss,
        })
    }
}

/// Geometric points around 0, plus a uniform grid for switching steps.
fn scan_points(uniform: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    for m in 0..=50 {
        let x = 2f64.powi(-m);
        v.push(x);
        v.push(-x);
    }
    for i in 0..=uniform {
        v.push(-1.0 + 2.0 * i as f64 / uniform.max(1) as f64);
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Zeros of the expanding coordinate, nearest to the curve's centre first,
/// each with the direction (+1 or -1 in the curve parameter) in which the
/// coordinate increases. Brackets come from opposite exit sides; a zero
/// is accepted only if the orbits at the limit end inside the box.
fn centres<'a>(ctx: &'a StepCtx, uniform: usize) -> Result<impl Iterator<Item = Result<(f64, f64), ConnectError>> + 'a, ConnectError> {
    let pts = scan_points(uniform);
    let sides: Vec<Side> = pts.iter().map(|&s| ctx.side(s)).collect::<Result<_, _>>()?;
    let mut cands: Vec<(f64, f64, i8)> = Vec::new();
    for i in 1..pts.len() {
        if let (Some(a), Some(b)) = (sides[i - 1].sign(), sides[i].sign()) {
            if a != b {
                cands.push((pts[i - 1], pts[i], a));
            }
        }
    }
    cands.sort_by(|x, y| x.0.abs().min(x.1.abs()).total_cmp(&y.0.abs().min(y.1.abs())));
    Ok(cands.into_iter().filter_map(move |(lo, hi, sl)| {
        let (mut a, mut b) = (lo, hi);
        loop {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            match ctx.side(m) {
                Err(e) => return Some(Err(e)),
                Ok(sd) => match sd.sign() {
                    None => return None,
                    Some(s) if s == sl => a = m,
                    Some(_) => b = m,
                },
            }
        }
        match (ctx.side(a), ctx.side(b)) {
            (Ok(Side::Value(ua)), Ok(Side::Value(ub))) => {
                let centre = if ua.abs() <= ub.abs() { a } else { b };
                Some(Ok((centre, -(sl as f64))))
            }
            (Err(e), _) | (_, Err(e)) => Some(Err(e)),
            _ => None,
        }
    }))
}

/// Edge of the set of curve parameters that end inside the target box,
/// moving from `centre` in direction `dir`.
fn box_edge(ctx: &StepCtx, centre: f64, dir: f64, step: usize) -> Result<f64, ConnectError> {
    let inside = |s: f64| -> Result<bool, ConnectError> { Ok(matches!(ctx.side(s)?, Side::Value(_))) };
    let mut d = 1e-16 * centre.abs().max(1e-3);
    let mut inner = centre;
    loop {
        let s = (centre + dir * d).clamp(-1.0, 1.0);
        if !inside(s)? {
            let (mut a, mut b) = (inner, s);
            loop {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                if inside(m)? {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(a);
        }
        if s.abs() >= 1.0 {
            return Err(ConnectError::TrackingLost { step, reason: "curve does not span the target box".into() });
        }
        inner = s;
        d *= 2.0;
    }
}

fn corridor_check(ctx: &StepCtx, centre: f64, window: i64) -> Result<usize, ConnectError> {
    let p = ctx.p;
    let (seg, _) = integrate_partial(Frame::Z, ctx.t0, ctx.curve.z(centre), ctx.t1, p, ctx.f, Tolerance::tight(), DOMAIN_RADIUS)?;
    let a = window_start(window, p);
    let b = window as f64 * PI + p.gamma;
    let n = 128;
    for i in 0..=n {
        let t = a + (b - a) * i as f64 / n as f64;
        let t = t.clamp(seg.t0.min(seg.t1), seg.t0.max(seg.t1));
        if !member_q(RegionTag::Z, t, seg.point(t), p).is_ok_and(|m| m.is_closed_member()) {
            return Err(ConnectError::CorridorMiss { window });
        }
    }
    let z = NamedRegion { tag: RegionTag::Z, params: *p };
    Ok(detect_events(&seg, &[&z]).len())
}

/// Runs the interval cascade over the checkpoints of windows
/// `k_lo - 1 ..= k_hi + 1` for the symbols of `seq`.
pub fn cascade(seq: &SymbolSequence, k_lo: i64, k_hi: i64, p: &ModelParams, f: &Perturbation) -> Result<Cascade, ConnectError> {
    let ks: Vec<i64> = (k_lo - 1..=k_hi + 1).collect();
    let times: Vec<f64> = ks.iter().map(|&k| checkpoint(k, p)).collect();
    let symbols: Vec<u8> = ks.iter().map(|&k| seq.get(k)).collect();
    let s0 = Saddle::of_symbol(symbols[0]);
    let scale = 1.1 * p.beta;
    let mut curves = vec![Curve::Linear { tau: times[0], saddle: s0, scale, dir: s0.unstable_dir(p.r) }];
    let mut steps = Vec::new();
    let mut global = Vec::new();
    // Affine map from the current curve parameter to the first one.
    let (mut off, mut mul) = (Qd::ZERO, Qd::ONE);
    for j in 0..ks.len() - 1 {
        let (src, tgt) = (Saddle::of_symbol(symbols[j]), Saddle::of_symbol(symbols[j + 1]));
        let ctx = StepCtx { curve: &curves[j], t0: times[j], t1: times[j + 1], tgt, p, f };
        let uniform = if src == tgt { 0 } else { SWITCH_SCAN };
        let mut found = None;
        let mut last_err = ConnectError::TrackingLost { step: j, reason: "no zero of the expanding coordinate on the curve".into() };
        for cand in centres(&ctx, uniform)? {
            let (centre, up) = cand?;
            let s_plus = box_edge(&ctx, centre, up, j)?;
            let s_minus = box_edge(&ctx, centre, -up, j)?;
            let events = if src != tgt {
                match corridor_check(&ctx, centre, ks[j + 1]) {
                    Ok(n) => n,
                    Err(e) => {
                        last_err = e;
                        continue;
                    }
                }
            } else {
                0
            };
            found = Some((centre, s_plus.min(s_minus), s_plus.max(s_minus), events));
            break;
        }
        let (centre, mu, nu, corridor_events) = found.ok_or(last_err)?;
        let nodes = Cheb::nodes(CHEB_NODES);
        let map = |x: f64| mu + (nu - mu) * 0.5 * (x + 1.0);
        let mut values = Vec::with_capacity(nodes.len());
        for &x in &nodes {
            let (z, _, done) = ctx.flow(map(x))?;
            if !done {
                return Err(ConnectError::TrackingLost { step: j, reason: "interpolation node escaped".into() });
            }
            values.push(z);
        }
        let cheb = Cheb { nodes: nodes.clone(), values };
        let mut interp_error: f64 = 0.0;
        for k in 0..4 {
            let x = 0.5 * (nodes[2 * k + 1] + nodes[2 * k + 2]);
            let (z, _, _) = ctx.flow(map(x))?;
            interp_error = interp_error.max((cheb.eval(x) - z).norm());
        }
        let (qmu, qnu) = (Qd::from_f64(mu), Qd::from_f64(nu));
        let g0 = off + mul * qmu;
        let g1 = off + mul * qnu;
        let (gl, gh) = if g0 <= g1 { (g0, g1) } else { (g1, g0) };
        global.push((gl, gh));
        let half = (qnu - qmu) * Qd::from_f64(0.5);
        off += mul * (qmu + half);
        mul *= half;
        steps.push(CascadeStep {
            window: ks[j],
            t_from: times[j],
            t_to: times[j + 1],
            from_symbol: symbols[j],
            to_symbol: symbols[j + 1],
            mu,
            nu,
            global_mu: gl.to_decimal(),
            global_nu: gh.to_decimal(),
            centre,
            interp_error,
            corridor_events,
        });
        curves.push(Curve::Cheb(cheb));
    }
    Ok(Cascade { steps, times, symbols, curves, global })
}

// ---------------------------------------------------------------------------
// Shooting

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotReport {
    pub word: String,
    /// Index of the first symbol of the word.
    pub start: i64,
    pub k_lo: i64,
    pub k_hi: i64,
    /// `q_x` with 17 significant digits.
    pub q_re: String,
    pub q_im: String,
    /// `q_x` at full precision.
    pub q_re_full: String,
    pub q_im_full: String,
    pub itinerary: Itinerary,
    pub expected: String,
    pub reproduces: bool,
    pub steps: Vec<CascadeStep>,
    pub nested: bool,
    pub newton_iterations: usize,
    pub defect: f64,
    /// `|Im w - xi(Re w)|` at the first checkpoint.
    pub unstable_residual: f64,
    /// Distance to the stable fiber at the last checkpoint.
    pub stable_residual: f64,
    pub params: ModelParams,
}

impl ShotReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

pub struct Shot {
    pub q: Complex<Qd>,
    pub report: ShotReport,
}

impl Shot {
    pub fn q_f64(&self) -> Complex64 {
        Complex64::new(self.q.re.to_f64(), self.q.im.to_f64())
    }
}

fn qc(z: Complex64) -> Complex<Qd> {
    Complex::new(Qd::from_f64(z.re), Qd::from_f64(z.im))
}

fn fc(z: Complex<Qd>) -> Complex64 {
    Complex64::new(z.re.to_f64(), z.im.to_f64())
}

fn half_turn_f64(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 0.5 * t)
}

/// Gradient of `h(x) = a Re y + b Im y`, `y = (x -+ 1) e^{-it/2}`, with
/// respect to `(Re x, Im x)`.
fn h_grad(s: Saddle, r: f64, t: f64) -> (f64, f64) {
    let (a, b) = s.stable_functional(r);
    let c = half_turn_f64(t).conj();
    // dy = c dx
    (a * c.re + b * c.im, -a * c.im + b * c.re)
}

struct Newton<'a> {
    times: Vec<Qd>,
    saddles: (Saddle, Saddle),
    dir0: Complex<Qd>,
    scale: Qd,
    p: &'a ModelParams,
}

impl Newton<'_> {
    fn x0(&self, o: Qd) -> Complex<Qd> {
        let y = Complex::new(self.dir0.re * o, self.dir0.im * o);
        from_frame(self.saddles.0.frame(), self.times[0], y).expect("saddle frame")
    }

    fn h(&self, x: Complex<Qd>) -> Qd {
        let m = self.times.len() - 1;
        let y = to_frame(self.saddles.1.frame(), self.times[m], x).expect("saddle frame");
        let (a, b) = self.saddles.1.stable_functional(self.p.r);
        y.re.mul_f64(a) + y.im.mul_f64(b)
    }

    fn residual(&self, o: Qd, xs: &[Complex<Qd>]) -> Result<Vec<Qd>, FlowError> {
        let m = self.times.len() - 1;
        let mut res = Vec::with_capacity(2 * m + 1);
        for j in 0..m {
            let from = if j == 0 { self.x0(o) } else { xs[j - 1] };
            let end = taylor_integrate(self.times[j], from, self.times[j + 1], self.p.r, 1e6)?.end();
            res.push(end.re - xs[j].re);
            res.push(end.im - xs[j].im);
        }
        res.push(self.h(xs[m - 1]) / self.scale);
        Ok(res)
    }

    fn jacobian(&self, o: Qd, xs: &[Complex<Qd>]) -> Result<DMatrix<f64>, FlowError> {
        let m = self.times.len() - 1;
        let n = 2 * m + 1;
        let mut jm = DMatrix::<f64>::zeros(n, n);
        let t: Vec<f64> = self.times.iter().map(|x| x.to_f64()).collect();
        // Column 0: o; columns 1 + 2(j-1), 2 + 2(j-1): x_j.
        for j in 0..m {
            let from = if j == 0 { fc(self.x0(o)) } else { fc(xs[j - 1]) };
            let (_, jac) = taylor_flow_jacobian(t[j], from, t[j + 1], self.p.r, 1e6)?;
            let row = 2 * j;
            if j == 0 {
                let d = fc(self.dir0) * half_turn_f64(t[0]);
                jm[(row, 0)] = jac[0][0] * d.re + jac[0][1] * d.im;
                jm[(row + 1, 0)] = jac[1][0] * d.re + jac[1][1] * d.im;
            } else {
                let col = 1 + 2 * (j - 1);
                jm[(row, col)] = jac[0][0];
                jm[(row, col + 1)] = jac[0][1];
                jm[(row + 1, col)] = jac[1][0];
                jm[(row + 1, col + 1)] = jac[1][1];
            }
            let col = 1 + 2 * j;
            jm[(row, col)] = -1.0;
            jm[(row + 1, col + 1)] = -1.0;
        }
        let (gx, gy) = h_grad(self.saddles.1, self.p.r, t[m]);
        let s = self.scale.to_f64();
        jm[(2 * m, 1 + 2 * (m - 1))] = gx / s;
        jm[(2 * m, 2 + 2 * (m - 1))] = gy / s;
        Ok(jm)
    }
}

fn max_abs(v: &[Qd]) -> f64 {
    v.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max)
}

/// Shoots the orbit with itinerary `seq` on windows `k_lo..=k_hi`
/// (the checkpoints run from `k_lo - 1` to `k_hi + 1`). Only the
/// unperturbed equation is supported.
pub fn shoot_sequence(seq: &SymbolSequence, k_lo: i64, k_hi: i64, p: &ModelParams, f: &Perturbation) -> Result<Shot, ConnectError> {
    if !f.is_zero() {
        return Err(ConnectError::Unsupported("shooting is implemented for f = 0 only".into()));
    }
    let k_lo = k_lo.min(0);
    let k_hi = k_hi.max(0);
    let cas = cascade(seq, k_lo, k_hi, p, f)?;
    let m = cas.times.len() - 1;
    let last = Saddle::of_symbol(*cas.symbols.last().unwrap());
    let first = Saddle::of_symbol(cas.symbols[0]);
    let r = p.r;

    // Match on the last curve.
    let curve = &cas.curves[m];
    let tm = cas.times[m];
    let hval = |s: f64| last.stable_h(r, to_frame(last.frame(), tm, curve.z(s)).expect("saddle frame"));
    let grid: Vec<f64> = (0..=64).map(|i| -1.0 + i as f64 / 32.0).collect();
    let mut root = None;
    for w in grid.windows(2) {
        let (ha, hb) = (hval(w[0]), hval(w[1]));
        if ha == 0.0 || ha.signum() != hb.signum() {
            let (mut a, mut b, sa) = (w[0], w[1], ha.signum());
            for _ in 0..100 {
                let c = 0.5 * (a + b);
                if c == a || c == b {
                    break;
                }
                if hval(c).signum() == sa {
                    a = c;
                } else {
                    b = c;
                }
            }
            root = Some(0.5 * (a + b));
            break;
        }
    }
    let mut s = root.ok_or(ConnectError::NoIntersection)?;

    // Back-substitute to initial guesses at every checkpoint.
    let mut guess = vec![Complex64::new(0.0, 0.0); m + 1];
    guess[m] = curve.z(s);
    for j in (0..m).rev() {
        let st = &cas.steps[j];
        s = st.mu + (st.nu - st.mu) * 0.5 * (s + 1.0);
        guess[j] = cas.curves[j].z(s);
    }
    let scale = 1.1 * p.beta;
    let o0 = scale * s;

    // Multiple shooting in quad-double.
    let ks: Vec<i64> = (k_lo - 1..=k_hi + 1).collect();
    let beta = Qd::from_f64(p.beta);
    let half_pi = Qd::pi() * Qd::from_f64(0.5);
    let times: Vec<Qd> = ks.iter().map(|&k| Qd::pi() * Qd::from_i64(k) - beta + half_pi).collect();
    let lam = (Qd::from_f64(4.0 * r * r) - Qd::from_f64(0.25)).sqrt();
    let two_r = Qd::from_f64(2.0 * r);
    let dir0 = match first {
        Saddle::Plus => Complex::new(Qd::ONE, (lam - two_r).mul_f64(2.0)),
        Saddle::Minus => Complex::new(Qd::ONE / (two_r + lam).mul_f64(2.0), Qd::ONE),
    };
    let nw = Newton { times, saddles: (first, last), dir0, scale: Qd::from_f64(p.beta), p };
    let mut o = Qd::from_f64(o0);
    let mut xs: Vec<Complex<Qd>> = guess[1..].iter().map(|&z| qc(z)).collect();
    let mut res = nw.residual(o, &xs)?;
    let mut iterations = 0;
    while max_abs(&res) > 1e-58 && iterations < 20 {
        iterations += 1;
        let jm = nw.jacobian(o, &xs)?;
        let rhs = DVector::from_iterator(res.len(), res.iter().map(|x| -x.to_f64()));
        let delta = jm.lu().solve(&rhs).ok_or(ConnectError::NoConvergence { defect: max_abs(&res) })?;
        // Residuals below f64 resolution are carried as Qd corrections.
        o += Qd::from_f64(delta[0]);
        for j in 0..m {
            xs[j].re += Qd::from_f64(delta[1 + 2 * j]);
            xs[j].im += Qd::from_f64(delta[2 + 2 * j]);
        }
        let new_res = nw.residual(o, &xs)?;
        if max_abs(&new_res) >= max_abs(&res) && max_abs(&new_res) > 1e-50 {
            res = new_res;
            break;
        }
        res = new_res;
    }
    let defect = max_abs(&res);
    if defect > 1e-40 {
        return Err(ConnectError::NoConvergence { defect });
    }

    // q_x at -beta from the checkpoint of window -1.
    let idx = (-1 - (k_lo - 1)) as usize;
    let from = if idx == 0 { nw.x0(o) } else { xs[idx - 1] };
    let q = taylor_integrate(nw.times[idx], from, -beta, r, 1e6)?.end();

    let itinerary = code_orbit_mp(q, k_lo, k_hi, p)?;
    let expected = word_string(&seq.window(k_lo, k_hi));
    let reproduces = itinerary.k_min == k_lo && itinerary.symbols == expected;

    let horizon = fiber_horizon(p);
    let unstable_residual = match first {
        Saddle::Plus => {
            let w0 = fc(to_frame(Frame::W, nw.times[0], nw.x0(o)).expect("w frame"));
            let fp = unstable_fiber(w0.re, cas.times[0], p, f, horizon)?;
            (w0.im - fp.xi).abs()
        }
        Saddle::Minus => f64::NAN,
    };
    let xm = fc(to_frame(last.frame(), nw.times[m], xs[m - 1]).expect("saddle frame"));
    let stable_residual = match last {
        Saddle::Plus => (xm.re - stable_fiber(last, xm.im, tm, p, f, horizon)?.xi).abs(),
        Saddle::Minus => (xm.im - stable_fiber(last, xm.re, tm, p, f, horizon)?.xi).abs(),
    };
    let qf = fc(q);
    let report = ShotReport {
        word: word_string(&seq.core),
        start: seq.start,
        k_lo,
        k_hi,
        q_re: format!("{:.16e}", qf.re),
        q_im: format!("{:.16e}", qf.im),
        q_re_full: q.re.to_decimal(),
        q_im_full: q.im.to_decimal(),
        itinerary,
        expected,
        reproduces,
        nested: cas.is_nested(),
        steps: cas.steps,
        newton_iterations: iterations,
        defect,
        unstable_residual,
        stable_residual,
        params: *p,
    };
    Ok(Shot { q, report })
}

/// Places `word` with zero tails admissibly for `graph` and shoots it, with
/// `margin` extra windows on each side (at least `right_min` on the right).
pub fn shoot(word: &[u8], graph: &VertexGraph, margin: i64, right_min: i64, p: &ModelParams, f: &Perturbation) -> Result<Shot, ConnectError> {
    let seq = place_word(graph, word).ok_or_else(|| ConnectError::NotAdmissible(word_string(word)))?;
    let lo = seq.start - margin;
    let hi = (seq.end() - 1 + margin).max(right_min);
    shoot_sequence(&seq, lo, hi, p, f)
}

/// The orbit of a shot as a dense Taylor orbit over windows `lo..=hi`.
pub fn shot_orbit(shot: &Shot, lo: i64, hi: i64, p: &ModelParams) -> impl ZOrbit {
    orbit_mp(shot.q, lo, hi, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_saddle_toy() {
        let curve = |s: f64| Complex64::new(s, 0.0);
        let rhs = |_: f64, x: Complex64| Complex64::new(x.re, -x.im);
        let bx = TrackBox { hx: 1.0, hy: 1.0 };
        let ti = track_curve(&curve, (-1.0, 1.0), 0.0, 1.0, &rhs, bx, Tolerance::tight()).unwrap();
        let e = (-1.0f64).exp();
        assert!((ti.mu + e).abs() < 1e-6, "{}", ti.mu);
        assert!((ti.nu - e).abs() < 1e-6, "{}", ti.nu);
        assert!(ti.history.len() > 2);
        let id = track_curve(&curve, (-1.0, 1.0), 0.0, 0.0, &rhs, bx, Tolerance::tight()).unwrap();
        assert_eq!((id.mu, id.nu), (-1.0, 1.0));
    }

    #[test]
    fn fibers_at_origin_and_symmetry() {
        let p = ModelParams::exploration(2.0);
        let f = Perturbation::zero();
        let h = fiber_horizon(&p);
        let z = unstable_fiber(0.0, 0.3, &p, &f, h).unwrap();
        assert!(z.xi.abs() < 1e-10);
        // The quadratic term is even, so the fiber is odd only to first order.
        let a = unstable_fiber(0.1, 0.3, &p, &f, h).unwrap();
        let b = unstable_fiber(-0.1, 0.3, &p, &f, h).unwrap();
        let a2 = unstable_fiber(0.05, 0.3, &p, &f, h).unwrap();
        let b2 = unstable_fiber(-0.05, 0.3, &p, &f, h).unwrap();
        let (d1, d2) = ((a.xi + b.xi).abs(), (a2.xi + b2.xi).abs());
        assert!(d1 < 0.05 * a.xi.abs());
        assert!((d1 / d2 - 4.0).abs() < 0.5, "{d1} {d2}");
        // Close to the linear direction.
        assert!((a.xi - 0.1 * kappa_u(2.0)).abs() < 0.01);
        let s = stable_fiber(Saddle::Plus, 0.1, 0.3, &p, &f, h).unwrap();
        assert!((s.xi - 0.1 * kappa_s(2.0)).abs() < 0.01);
        let t = stable_fiber(Saddle::Minus, 0.1, 0.3, &p, &f, h).unwrap();
        assert!((t.xi + 0.1 * kappa_u(2.0)).abs() < 0.01);
    }
}
