//! Adaptive integration with dense output, boundary events, the Poincare
//! map and its fixed points.

mod dop853;
mod dop853_tableau;
mod events;
pub mod taylor;

pub use dop853::{DensePiece, Dop853};
pub use events::{detect_events, AxisBox, Direction, EventRecord, EventRegion, NamedRegion};

use crate::model::{field_in, from_frame, Frame, Mode, ModelError, ModelParams, Perturbation};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-10, atol: 1e-12 }
    }
}

impl Tolerance {
    pub fn tight() -> Self {
        Tolerance { rtol: 1e-13, atol: 1e-15 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("orbit left the domain at t = {t} (|z| = {})", z.norm())]
    BlowUp { t: f64, z: Complex64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("tolerance must be positive")]
    ToleranceNotMet,
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Radius of the domain where the hypotheses on `f` are imposed.
pub const DOMAIN_RADIUS: f64 = 3.0;
/// Escape radius used in exploration mode.
pub const ESCAPE_RADIUS: f64 = 1e6;
const MAX_STEPS: usize = 5_000_000;

/// Dense orbit over `[t0, t1]` (either orientation).
#[derive(Debug, Clone)]
pub struct OrbitSegment {
    pub frame: Option<Frame>,
    pub t0: f64,
    pub t1: f64,
    pub x0: Complex64,
    pub pieces: Vec<DensePiece>,
    /// Largest accepted local error estimate.
    pub accuracy: f64,
}

impl OrbitSegment {
    pub fn end(&self) -> Complex64 {
        self.pieces.last().map_or(self.x0, |p| p.eval(p.t_new()))
    }

    fn piece_index(&self, t: f64) -> usize {
        let fwd = self.t1 >= self.t0;
        let n = self.pieces.len();
        // Pieces are ordered along the direction of integration.
        let idx = self.pieces.partition_point(|p| if fwd { p.t_new() < t } else { p.t_new() > t });
        idx.min(n.saturating_sub(1))
    }

    /// Dense value; `t` is clamped to the segment.
    pub fn point(&self, t: f64) -> Complex64 {
        if self.pieces.is_empty() {
            return self.x0;
        }
        let (lo, hi) = if self.t0 <= self.t1 { (self.t0, self.t1) } else { (self.t1, self.t0) };
        let t = t.clamp(lo, hi);
        if t == self.t0 {
            return self.x0;
        }
        self.pieces[self.piece_index(t)].eval(t)
    }

    /// `n + 1` equally spaced samples including both ends.
    pub fn sample(&self, n: usize) -> Vec<(f64, Complex64)> {
        (0..=n)
            .map(|i| {
                let t = self.t0 + (self.t1 - self.t0) * i as f64 / n as f64;
                (t, self.point(t))
            })
            .collect()
    }

    /// `t,re,im,frame` with 17 significant digits.
    pub fn to_csv(&self, n: usize) -> String {
        let tag = self.frame.map_or("none", |f| f.tag());
        let mut s = String::from("t,re,im,frame\n");
        for (t, x) in self.sample(n) {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{}", t, x.re, x.im, tag);
        }
        s
    }

    /// The orbit mapped into another frame, as samples.
    pub fn in_frame(&self, target: Frame, n: usize) -> Result<Vec<(f64, Complex64)>, FlowError> {
        let src = self.frame.ok_or(ModelError::FrameNeedsReference)?;
        self.sample(n)
            .into_iter()
            .map(|(t, x)| {
                let q = from_frame(src, t, x)?;
                Ok((t, crate::model::to_frame(target, t, q)?))
            })
            .collect()
    }
}

/// Parses the orbit CSV of [`OrbitSegment::to_csv`]; `#` lines are skipped.
pub fn parse_orbit_csv(text: &str) -> Result<Vec<(f64, Complex64, String)>, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    if lines.next() != Some("t,re,im,frame") {
        return Err("missing header t,re,im,frame".into());
    }
    lines
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            if v.len() != 4 {
                return Err(format!("bad row {l}"));
            }
            let num = |x: &str| x.parse::<f64>().map_err(|_| format!("bad number {x}"));
            Ok((num(v[0])?, Complex64::new(num(v[1])?, num(v[2])?), v[3].to_string()))
        })
        .collect()
}

/// Integrates `x' = rhs(t, x)`; `limit` bounds `|x|`.
pub fn integrate_fn<F>(rhs: F, t0: f64, x0: Complex64, t1: f64, tol: Tolerance, limit: Option<f64>) -> Result<OrbitSegment, FlowError>
where
    F: FnMut(f64, Complex64) -> Complex64,
{
    integrate_guarded(rhs, t0, x0, t1, tol, None, |_, x| limit.is_some_and(|r| x.norm() >= r))
}

fn integrate_guarded<F, G>(
    rhs: F,
    t0: f64,
    x0: Complex64,
    t1: f64,
    tol: Tolerance,
    frame: Option<Frame>,
    escaped: G,
) -> Result<OrbitSegment, FlowError>
where
    F: FnMut(f64, Complex64) -> Complex64,
    G: Fn(f64, Complex64) -> bool,
{
    match integrate_guarded_partial(rhs, t0, x0, t1, tol, frame, escaped) {
        (seg, None) => Ok(seg),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`integrate_guarded`] but keeps the orbit computed before a failure.
fn integrate_guarded_partial<F, G>(
    rhs: F,
    t0: f64,
    x0: Complex64,
    t1: f64,
    tol: Tolerance,
    frame: Option<Frame>,
    escaped: G,
) -> (OrbitSegment, Option<FlowError>)
where
    F: FnMut(f64, Complex64) -> Complex64,
    G: Fn(f64, Complex64) -> bool,
{
    let mut seg = OrbitSegment { frame, t0, t1, x0, pieces: Vec::new(), accuracy: 0.0 };
    if !(tol.rtol > 0.0 && tol.atol > 0.0) {
        return (seg, Some(FlowError::ToleranceNotMet));
    }
    let mut st = Dop853::new(rhs, t0, x0, t1, tol);
    let mut err = None;
    while !st.done() {
        if st.steps >= MAX_STEPS {
            err = Some(FlowError::MaxSteps { t: st.t });
            break;
        }
        match st.step() {
            Ok(piece) => seg.pieces.push(piece),
            Err(e) => {
                err = Some(e);
                break;
            }
        }
        if escaped(st.t, st.y) {
            let z = match frame {
                Some(fr) if fr != Frame::Diff => from_frame(fr, st.t, st.y).unwrap_or(st.y),
                _ => st.y,
            };
            err = Some(FlowError::BlowUp { t: st.t, z });
            break;
        }
    }
    seg.accuracy = st.local_error;
    if err.is_some() {
        // The segment ends where the integration stopped.
        seg.t1 = st.t;
    }
    (seg, err)
}

/// Escape radius for `z` in the given mode.
pub fn blowup_radius(p: &ModelParams) -> f64 {
    match p.mode {
        Mode::Certification => DOMAIN_RADIUS,
        Mode::Exploration => ESCAPE_RADIUS,
    }
}

/// Integrates the field of `frame` from `(t0, x0)` to `t1`.
pub fn integrate(
    frame: Frame,
    t0: f64,
    x0: Complex64,
    t1: f64,
    p: &ModelParams,
    f: &Perturbation,
    tol: Tolerance,
) -> Result<OrbitSegment, FlowError> {
    // Validate the frame once; the closure below cannot fail afterwards.
    field_in(frame, t0, x0, p, f)?;
    let radius = blowup_radius(p);
    integrate_guarded(
        |t, x| field_in(frame, t, x, p, f).expect("frame validated"),
        t0,
        x0,
        t1,
        tol,
        Some(frame),
        |t, x| from_frame(frame, t, x).map_or(true, |z| z.norm() >= radius),
    )
}

/// [`integrate`] that returns the orbit computed up to a failure together
/// with the failure.
pub fn integrate_partial(
    frame: Frame,
    t0: f64,
    x0: Complex64,
    t1: f64,
    p: &ModelParams,
    f: &Perturbation,
    tol: Tolerance,
    radius: f64,
) -> Result<(OrbitSegment, Option<FlowError>), FlowError> {
    field_in(frame, t0, x0, p, f)?;
    Ok(integrate_guarded_partial(
        |t, x| field_in(frame, t, x, p, f).expect("frame validated"),
        t0,
        x0,
        t1,
        tol,
        Some(frame),
        |t, x| from_frame(frame, t, x).map_or(true, |z| z.norm() >= radius),
    ))
}

/// `phi_(t0, t1 - t0)(q)` in the z-frame.
pub fn flow_map(q: Complex64, t0: f64, t1: f64, p: &ModelParams, f: &Perturbation, tol: Tolerance) -> Result<Complex64, FlowError> {
    Ok(integrate(Frame::Z, t0, q, t1, p, f, tol)?.end())
}

/// Poincare map over one period, starting at `-beta`.
pub fn poincare(q: Complex64, p: &ModelParams, f: &Perturbation, tol: Tolerance) -> Result<Complex64, FlowError> {
    flow_map(q, -p.beta, -p.beta + 2.0 * PI, p, f, tol)
}

/// A 2pi-periodic orbit found by multiple shooting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Node at `t = -beta`.
    pub q: Complex64,
    /// Nodes at `-beta + 2 pi j / m`, `j = 0..m`.
    pub nodes: Vec<Complex64>,
    /// Largest mismatch between a segment end and the next node.
    pub defect: f64,
    pub iterations: usize,
}

/// Number of shooting segments: about one unit of unstable growth each.
fn shooting_segments(p: &ModelParams) -> usize {
    let lambda = (4.0 * p.r * p.r - 0.25).max(0.0).sqrt();
    ((lambda * 2.0 * PI).ceil() as usize).clamp(8, 400)
}

/// Newton iteration on the multiple-shooting system for the period map.
/// Returns the full report; [`find_periodic`] keeps only the node.
pub fn find_periodic_orbit(near: Complex64, p: &ModelParams, f: &Perturbation, tol: Tolerance) -> Result<PeriodicOrbit, FlowError> {
    let m = shooting_segments(p);
    let t = |j: usize| -p.beta + 2.0 * PI * j as f64 / m as f64;
    let mut x = vec![near; m];
    let residuals = |x: &[Complex64]| -> Result<Vec<Complex64>, FlowError> {
        (0..m).map(|j| Ok(flow_map(x[j], t(j), t(j + 1), p, f, tol)? - x[(j + 1) % m])).collect()
    };
    let norm = |r: &[Complex64]| r.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let mut r = residuals(&x)?;
    for it in 0..40 {
        if norm(&r) < 1e-12 {
            return Ok(PeriodicOrbit { q: x[0], nodes: x, defect: norm(&r), iterations: it });
        }
        let h = 1e-7;
        let mut jac = DMatrix::<f64>::zeros(2 * m, 2 * m);
        let mut rhs = DVector::<f64>::zeros(2 * m);
        for j in 0..m {
            let base = r[j] + x[(j + 1) % m];
            let gx = (flow_map(x[j] + h, t(j), t(j + 1), p, f, tol)? - base) / h;
            let gy = (flow_map(x[j] + Complex64::new(0.0, h), t(j), t(j + 1), p, f, tol)? - base) / h;
            let (row, next) = (2 * j, 2 * ((j + 1) % m));
            jac[(row, row)] = gx.re;
            jac[(row, row + 1)] = gy.re;
            jac[(row + 1, row)] = gx.im;
            jac[(row + 1, row + 1)] = gy.im;
            jac[(row, next)] -= 1.0;
            jac[(row + 1, next + 1)] -= 1.0;
            rhs[row] = -r[j].re;
            rhs[row + 1] = -r[j].im;
        }
        let d = jac
            .lu()
            .solve(&rhs)
            .ok_or(FlowError::NoConvergence { iterations: it, residual: norm(&r) })?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<Complex64> = (0..m).map(|j| x[j] + Complex64::new(d[2 * j], d[2 * j + 1]) * scale).collect();
            if let Ok(rc) = residuals(&cand) {
                if norm(&rc) < norm(&r) {
                    x = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let defect = norm(&r);
    if defect < 1e-9 {
        Ok(PeriodicOrbit { q: x[0], nodes: x, defect, iterations: 40 })
    } else {
        Err(FlowError::NoConvergence { iterations: 40, residual: defect })
    }
}

/// Fixed point of the Poincare map near `near`. The residual is measured
/// per shooting segment: over a full period the unstable multiplier
/// `e^{2 pi lambda}` amplifies integration error beyond any fixed bound.
pub fn find_periodic(near: Complex64, p: &ModelParams, f: &Perturbation, tol: Tolerance) -> Result<Complex64, FlowError> {
    find_periodic_orbit(near, p, f, tol).map(|o| o.q)
}

/// Exponential growth factor of the linearisation at the saddles over `dt`.
pub fn growth_estimate(p: &ModelParams, dt: f64) -> f64 {
    (2.0 * p.r * dt.abs()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let seg = integrate_fn(|_, x| -x, 0.0, Complex64::new(1.0, 0.0), 3.0, Tolerance::default(), None).unwrap();
        assert!((seg.end().re - (-3.0f64).exp()).abs() < 1e-10);
        assert!((seg.point(1.3).re - (-1.3f64).exp()).abs() < 1e-9);
        let back = integrate_fn(|_, x| -x, 3.0, seg.end(), 0.0, Tolerance::default(), None).unwrap();
        assert!((back.end().re - 1.0).abs() < 1e-9);
        assert!((back.point(2.0).re - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rotation_is_dense() {
        let seg = integrate_fn(|_, x| Complex64::i() * x, 0.0, Complex64::new(1.0, 0.0), 10.0, Tolerance::default(), None).unwrap();
        for i in 0..100 {
            let t = 0.1 * i as f64;
            assert!((seg.point(t) - Complex64::from_polar(1.0, t)).norm() < 1e-8);
        }
    }

    #[test]
    fn start_point_exact() {
        let x0 = Complex64::new(0.123456789, -0.3);
        let seg = integrate_fn(|t, x| x * x + t, 0.0, x0, 0.5, Tolerance::default(), None).unwrap();
        assert_eq!(seg.point(0.0), x0);
    }
}
