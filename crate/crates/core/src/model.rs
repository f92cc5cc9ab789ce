//! Parameters, perturbations, vector fields and frame changes.

use crate::mp::Real;
use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("certification mode requires R >= 100 and R >= 100 N (got R = {r}, N = {n})")]
    OutsideTheoremRegime { r: f64, n: f64 },
    #[error("the difference frame needs a reference point")]
    FrameNeedsReference,
    #[error("perturbation contract violated: {0}")]
    Contract(String),
    #[error("unknown perturbation '{0}'")]
    UnknownPerturbation(String),
}

/// Whether outputs are claimed inside the hypotheses of the theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exploration,
    Certification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub a: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Multiplier on the half-width of the corridor set Z. Equal to 1 in
    /// certification mode.
    pub corridor_scale: f64,
    pub mode: Mode,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            r: 100.0,
            n: 1.0,
            a: 0.7,
            beta: 0.01,
            gamma: 0.01,
            delta: 0.01,
            corridor_scale: 1.0,
            mode: Mode::Certification,
        }
    }
}

impl ModelParams {
    /// Theorem-regime parameters; fails unless `R >= 100` and `R >= 100 N`.
    pub fn certification(r: f64, n: f64) -> Result<Self, ModelError> {
        let p = ModelParams { r, n, ..Default::default() };
        p.validate()?;
        Ok(p)
    }

    /// Moderate-R parameters. The time margins shrink like `0.4 / R` so that
    /// the switching transit (duration about `1.1 / R`) fits the corridor
    /// slab, and the corridor is widened by `max(1, 8 / R)` to contain the
    /// transverse excursion of the connecting orbits, which scales like `0.3 / R`.
    pub fn exploration(r: f64) -> Self {
        let m = (0.4 / r).min(0.4);
        ModelParams {
            r,
            n: 0.0,
            a: 0.7,
            beta: m,
            gamma: m,
            delta: m,
            corridor_scale: (8.0 / r).max(1.0),
            mode: Mode::Exploration,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let pos = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter { name, reason: format!("must be positive, got {v}") })
            }
        };
        pos("R", self.r)?;
        pos("a", self.a)?;
        pos("beta", self.beta)?;
        pos("gamma", self.gamma)?;
        pos("delta", self.delta)?;
        pos("corridor_scale", self.corridor_scale)?;
        if !(self.n.is_finite() && self.n >= 0.0) {
            return Err(ModelError::InvalidParameter { name: "N", reason: format!("must be nonnegative, got {}", self.n) });
        }
        if self.mode == Mode::Certification && !self.in_theorem_regime() {
            return Err(ModelError::OutsideTheoremRegime { r: self.r, n: self.n });
        }
        Ok(())
    }

    pub fn in_theorem_regime(&self) -> bool {
        self.r >= 100.0 && self.r >= 100.0 * self.n
    }

    /// Short label attached to every artifact.
    pub fn regime_label(&self) -> &'static str {
        match (self.mode, self.in_theorem_regime()) {
            (Mode::Certification, _) => "certification",
            (Mode::Exploration, true) => "exploration",
            (Mode::Exploration, false) => "exploration (outside theorem regime)",
        }
    }
}

type Evaluator = dyn Fn(f64, Complex64) -> Complex64 + Send + Sync;

/// A forcing term `f(t, z)`, 2π-periodic in `t`, with declared sup bound and
/// Lipschitz constant.
#[derive(Clone)]
pub struct Perturbation {
    name: String,
    eval: Arc<Evaluator>,
    pub bound: f64,
    pub lipschitz: f64,
    pub periodic: bool,
    zero: bool,
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractReport {
    pub samples: usize,
    pub max_abs: f64,
    pub max_quotient: f64,
    pub max_period_defect: f64,
}

fn clip3(z: Complex64) -> Complex64 {
    let m = z.norm();
    if m < 3.0 {
        z
    } else {
        z * (3.0 / m)
    }
}

impl Perturbation {
    pub fn new<F>(name: impl Into<String>, bound: f64, lipschitz: f64, f: F) -> Self
    where
        F: Fn(f64, Complex64) -> Complex64 + Send + Sync + 'static,
    {
        Perturbation { name: name.into(), eval: Arc::new(f), bound, lipschitz, periodic: true, zero: false }
    }

    pub fn zero() -> Self {
        Perturbation {
            name: "zero".into(),
            eval: Arc::new(|_, _| Complex64::new(0.0, 0.0)),
            bound: 0.0,
            lipschitz: 0.0,
            periodic: true,
            zero: true,
        }
    }

    /// `eps * e^{it}`.
    pub fn rotating(eps: f64) -> Self {
        Self::new("rotating", eps.abs(), 0.0, move |t, _| Complex64::from_polar(eps, t))
    }

    /// `eps * sin(t) * clip(z)` with `clip` the radial projection onto `|z| <= 3`.
    pub fn sin_linear(eps: f64) -> Self {
        Self::new("sin_linear", 3.0 * eps.abs(), eps.abs(), move |t, z| clip3(z) * (eps * t.sin()))
    }

    /// Catalog lookup by name.
    pub fn from_catalog(name: &str, eps: f64) -> Result<Self, ModelError> {
        match name {
            "zero" | "none" => Ok(Self::zero()),
            "rotating" => Ok(Self::rotating(eps)),
            "sin_linear" => Ok(Self::sin_linear(eps)),
            other => Err(ModelError::UnknownPerturbation(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    #[inline]
    pub fn eval(&self, t: f64, z: Complex64) -> Complex64 {
        (self.eval)(t, z)
    }

    /// Spot-checks sup bound, Lipschitz quotient and periodicity against the
    /// bound `n` on a deterministic grid of the disk `|z| < 3`.
    pub fn check_contract(&self, n: f64) -> Result<ContractReport, ModelError> {
        let mut max_abs: f64 = 0.0;
        let mut max_q: f64 = 0.0;
        let mut max_per: f64 = 0.0;
        let mut count = 0;
        let two_pi = 2.0 * std::f64::consts::PI;
        for it in 0..24 {
            let t = -7.0 + 0.61 * it as f64;
            for ir in 0..8 {
                let rad = 2.95 * (ir as f64 + 0.5) / 8.0;
                for ia in 0..12 {
                    let z = Complex64::from_polar(rad, 0.523 * ia as f64 + 0.1 * ir as f64);
                    let v = self.eval(t, z);
                    max_abs = max_abs.max(v.norm());
                    let dz = Complex64::from_polar(1e-3 + 0.01 * ia as f64, 0.37 * it as f64);
                    let z2 = z + dz;
                    if z2.norm() < 3.0 {
                        let q = (self.eval(t, z2) - v).norm() / dz.norm();
                        max_q = max_q.max(q);
                    }
                    max_per = max_per.max((self.eval(t + two_pi, z) - v).norm());
                    count += 1;
                }
            }
        }
        let tol = 1e-12 * (1.0 + n);
        if max_abs > n + tol {
            return Err(ModelError::Contract(format!("sampled |f| = {max_abs} exceeds N = {n}")));
        }
        if max_q > n * (1.0 + 1e-9) + tol {
            return Err(ModelError::Contract(format!("sampled difference quotient {max_q} exceeds N = {n}")));
        }
        if self.periodic && max_per > 1e-9 * (1.0 + max_abs) {
            return Err(ModelError::Contract(format!("not 2π-periodic (defect {max_per})")));
        }
        Ok(ContractReport { samples: count, max_abs, max_quotient: max_q, max_period_defect: max_per })
    }
}

/// Coordinate frames used by the lemmas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    /// Original coordinate `q`.
    Z,
    /// `w = (q - 1) e^{-it/2}`, co-rotating around +1.
    W,
    /// `p = (q + 1) e^{-it/2}`, co-rotating around -1.
    P,
    /// W frame under time reversal: the point at reversed time `s` is
    /// `w` at original time `-s`, i.e. `(q - 1) e^{is/2}`.
    What,
    /// Difference of two What-frame points; needs a reference.
    Diff,
}

impl Frame {
    pub fn tag(self) -> &'static str {
        match self {
            Frame::Z => "z",
            Frame::W => "w",
            Frame::P => "p",
            Frame::What => "what",
            Frame::Diff => "diff",
        }
    }

    pub fn parse(s: &str) -> Option<Frame> {
        match s {
            "z" | "Z" => Some(Frame::Z),
            "w" | "W" => Some(Frame::W),
            "p" | "P" => Some(Frame::P),
            "what" | "WHAT" => Some(Frame::What),
            "diff" | "DIFF" => Some(Frame::Diff),
            _ => None,
        }
    }
}

#[inline]
fn half_turn<T: Real>(t: T, sign: f64) -> Complex<T> {
    let (s, c) = t.mul_f64(0.5).sin_cos();
    Complex::new(c, s.mul_f64(sign))
}

/// Maps a z-frame point `q` at time `t` into `frame`.
pub fn to_frame<T: Real>(frame: Frame, t: T, q: Complex<T>) -> Result<Complex<T>, ModelError> {
    let one = Complex::new(T::one(), T::zero());
    match frame {
        Frame::Z => Ok(q),
        Frame::W => Ok((q - one) * half_turn(t, -1.0)),
        Frame::P => Ok((q + one) * half_turn(t, -1.0)),
        Frame::What => Ok((q - one) * half_turn(t, 1.0)),
        Frame::Diff => Err(ModelError::FrameNeedsReference),
    }
}

/// Inverse of [`to_frame`].
pub fn from_frame<T: Real>(frame: Frame, t: T, x: Complex<T>) -> Result<Complex<T>, ModelError> {
    let one = Complex::new(T::one(), T::zero());
    match frame {
        Frame::Z => Ok(x),
        Frame::W => Ok(x * half_turn(t, 1.0) + one),
        Frame::P => Ok(x * half_turn(t, 1.0) - one),
        Frame::What => Ok(x * half_turn(t, -1.0) + one),
        Frame::Diff => Err(ModelError::FrameNeedsReference),
    }
}

/// Difference-frame coordinate `zeta = a - chi` of the What-frame point of `q`.
pub fn to_diff_frame(t: f64, q: Complex64, chi: Complex64) -> Complex64 {
    (q - 1.0) * Complex64::from_polar(1.0, 0.5 * t) - chi
}

/// `R e^{it} (conj(z)^2 - 1) + f(t, z)`.
#[inline]
pub fn field_z(t: f64, z: Complex64, p: &ModelParams, f: &Perturbation) -> Complex64 {
    let zc = z.conj();
    Complex64::from_polar(p.r, t) * (zc * zc - 1.0) + f.eval(t, z)
}

/// `2R conj(w) + R e^{-it/2} conj(w)^2 - (i/2) w + e^{-it/2} f(t, w e^{it/2} + 1)`.
#[inline]
pub fn field_w(t: f64, w: Complex64, p: &ModelParams, f: &Perturbation) -> Complex64 {
    let rot = Complex64::from_polar(1.0, -0.5 * t);
    let wc = w.conj();
    let mut v = 2.0 * p.r * wc + p.r * rot * wc * wc - Complex64::new(0.0, 0.5) * w;
    if !f.is_zero() {
        v += rot * f.eval(t, w * rot.conj() + 1.0);
    }
    v
}

/// `-2R conj(p) + R e^{-it/2} conj(p)^2 - (i/2) p + e^{-it/2} f(t, p e^{it/2} - 1)`.
#[inline]
pub fn field_p(t: f64, pt: Complex64, p: &ModelParams, f: &Perturbation) -> Complex64 {
    let rot = Complex64::from_polar(1.0, -0.5 * t);
    let pc = pt.conj();
    let mut v = -2.0 * p.r * pc + p.r * rot * pc * pc - Complex64::new(0.0, 0.5) * pt;
    if !f.is_zero() {
        v += rot * f.eval(t, pt * rot.conj() - 1.0);
    }
    v
}

/// Time reversal of [`field_w`] with `f = 0`:
/// `-2R conj(a) - R e^{it/2} conj(a)^2 + (i/2) a`.
#[inline]
pub fn field_what(t: f64, a: Complex64, p: &ModelParams) -> Complex64 {
    let ac = a.conj();
    -2.0 * p.r * ac - p.r * Complex64::from_polar(1.0, 0.5 * t) * ac * ac + Complex64::new(0.0, 0.5) * a
}

/// Difference of two What-frame velocities, `zeta = a1 - a2`, `chi = a2`:
/// `-2R conj(zeta) - R e^{it/2} conj(zeta) (conj(zeta) + 2 conj(chi)) + (i/2) zeta`.
#[inline]
pub fn field_diff(t: f64, zeta: Complex64, chi: Complex64, p: &ModelParams) -> Complex64 {
    let zc = zeta.conj();
    -2.0 * p.r * zc - p.r * Complex64::from_polar(1.0, 0.5 * t) * zc * (zc + 2.0 * chi.conj())
        + Complex64::new(0.0, 0.5) * zeta
}

/// Velocity in `frame`. `Diff` is not a standalone frame here; use [`field_diff`].
pub fn field_in(frame: Frame, t: f64, x: Complex64, p: &ModelParams, f: &Perturbation) -> Result<Complex64, ModelError> {
    match frame {
        Frame::Z => Ok(field_z(t, x, p, f)),
        Frame::W => Ok(field_w(t, x, p, f)),
        Frame::P => Ok(field_p(t, x, p, f)),
        Frame::What => {
            if f.is_zero() {
                Ok(field_what(t, x, p))
            } else {
                // Reversal of the full W-frame field.
                Ok(-field_w(-t, x, p, f))
            }
        }
        Frame::Diff => Err(ModelError::FrameNeedsReference),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn equilibria() {
        let p = ModelParams::default();
        let f = Perturbation::zero();
        for k in 0..20 {
            let t = -3.0 + 0.77 * k as f64;
            assert_eq!(field_z(t, c(1.0, 0.0), &p, &f), c(0.0, 0.0));
            assert_eq!(field_z(t, c(-1.0, 0.0), &p, &f), c(0.0, 0.0));
        }
    }

    #[test]
    fn spot_values() {
        let p = ModelParams::default();
        let f = Perturbation::zero();
        assert_eq!(field_z(0.0, c(0.0, 0.0), &p, &f), c(-100.0, 0.0));
        let v = field_w(0.0, c(0.01, 0.0), &p, &f);
        assert!((v - c(2.01, -0.005)).norm() < 1e-13);
        let v = field_p(0.0, c(0.01, 0.0), &p, &f);
        assert!((v - c(-1.99, -0.005)).norm() < 1e-13);
    }

    #[test]
    fn catalog_contracts() {
        Perturbation::zero().check_contract(0.0).unwrap();
        Perturbation::rotating(0.5).check_contract(0.5).unwrap();
        Perturbation::sin_linear(0.1).check_contract(0.3).unwrap();
        assert!(Perturbation::sin_linear(0.1).check_contract(0.05).is_err());
    }

    #[test]
    fn certification_guard() {
        assert!(ModelParams::certification(100.0, 1.0).is_ok());
        assert!(ModelParams::certification(50.0, 0.1).is_err());
        assert!(ModelParams::certification(100.0, 2.0).is_err());
        assert!(ModelParams::exploration(2.0).validate().is_ok());
    }
}
