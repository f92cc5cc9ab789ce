//! Explicit Runge-Kutta 8(5,3) with 7th-order dense output, for a scalar
//! complex state.

use super::dop853_tableau::{A, B, C, D, E3, E5};
use super::{FlowError, Tolerance};
use num_complex::Complex64;

const N_STAGES: usize = 12;
const N_EXT: usize = 16;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ALPHA: f64 = 1.0 / 8.0 - 0.2 * BETA;
const BETA: f64 = 0.04;

/// Dense polynomial for one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DensePiece {
    pub t_old: f64,
    pub h: f64,
    pub y_old: Complex64,
    pub f: [Complex64; 7],
}

impl DensePiece {
    pub fn t_new(&self) -> f64 {
        self.t_old + self.h
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let x = (t - self.t_old) / self.h;
        let mut y = Complex64::new(0.0, 0.0);
        for (i, fi) in self.f.iter().rev().enumerate() {
            y += fi;
            if i % 2 == 0 {
                y *= x;
            } else {
                y *= 1.0 - x;
            }
        }
        y + self.y_old
    }
}

/// Stepper state; `rhs` is evaluated at most 16 times per accepted step.
pub struct Dop853<F: FnMut(f64, Complex64) -> Complex64> {
    rhs: F,
    pub t: f64,
    pub y: Complex64,
    f: Complex64,
    t_bound: f64,
    dir: f64,
    h_abs: f64,
    tol: Tolerance,
    k: [Complex64; N_EXT],
    err_prev: f64,
    rejected: bool,
    pub steps: usize,
    pub evaluations: usize,
    /// Largest accepted local error in absolute units.
    pub local_error: f64,
}

fn scaled_sq(v: Complex64, s: (f64, f64)) -> f64 {
    (v.re / s.0).powi(2) + (v.im / s.1).powi(2)
}

impl<F: FnMut(f64, Complex64) -> Complex64> Dop853<F> {
    pub fn new(mut rhs: F, t0: f64, y0: Complex64, t_bound: f64, tol: Tolerance) -> Self {
        let f0 = rhs(t0, y0);
        let dir = if t_bound >= t0 { 1.0 } else { -1.0 };
        let mut s = Dop853 {
            rhs,
            t: t0,
            y: y0,
            f: f0,
            t_bound,
            dir,
            h_abs: 0.0,
            tol,
            k: [Complex64::new(0.0, 0.0); N_EXT],
            err_prev: 1e-4,
            rejected: false,
            steps: 0,
            evaluations: 1,
            local_error: 0.0,
        };
        s.h_abs = s.initial_step();
        s
    }

    fn scale(&self, y: Complex64) -> (f64, f64) {
        (self.tol.atol + self.tol.rtol * y.re.abs(), self.tol.atol + self.tol.rtol * y.im.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let span = (self.t_bound - self.t).abs();
        if span == 0.0 {
            return 0.0;
        }
        let sc = self.scale(self.y);
        let d0 = (scaled_sq(self.y, sc) / 2.0).sqrt();
        let d1 = (scaled_sq(self.f, sc) / 2.0).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1 = self.y + self.dir * h0 * self.f;
        let f1 = (self.rhs)(self.t + self.dir * h0, y1);
        self.evaluations += 1;
        let d2 = (scaled_sq(f1 - self.f, sc) / 2.0).sqrt() / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(span)
    }

    fn stages(&mut self, h: f64) -> Complex64 {
        self.k[0] = self.f;
        for s in 1..N_STAGES {
            let mut dy = Complex64::new(0.0, 0.0);
            for j in 0..s {
                dy += self.k[j] * A[s][j];
            }
            self.k[s] = (self.rhs)(self.t + C[s] * h, self.y + dy * h);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..N_STAGES {
            acc += self.k[j] * B[j];
        }
        self.evaluations += N_STAGES - 1;
        self.y + acc * h
    }

    fn error_norm(&self, h: f64, y_new: Complex64) -> f64 {
        let s = (
            self.tol.atol + self.tol.rtol * self.y.re.abs().max(y_new.re.abs()),
            self.tol.atol + self.tol.rtol * self.y.im.abs().max(y_new.im.abs()),
        );
        let mut e5 = Complex64::new(0.0, 0.0);
        let mut e3 = Complex64::new(0.0, 0.0);
        for j in 0..=N_STAGES {
            e5 += self.k[j] * E5[j];
            e3 += self.k[j] * E3[j];
        }
        let n5 = scaled_sq(e5, s);
        let n3 = scaled_sq(e3, s);
        if n5 == 0.0 && n3 == 0.0 {
            return 0.0;
        }
        h.abs() * n5 / ((n5 + 0.01 * n3) * 2.0).sqrt()
    }

    pub fn done(&self) -> bool {
        self.dir * (self.t - self.t_bound) >= 0.0
    }

    /// Advances one accepted step and returns its dense piece.
    pub fn step(&mut self) -> Result<DensePiece, FlowError> {
        let min_step = 10.0 * (self.t.abs() * f64::EPSILON).max(f64::MIN_POSITIVE);
        let mut h_abs = self.h_abs.max(min_step);
        loop {
            if h_abs < min_step {
                return Err(FlowError::StepUnderflow { t: self.t });
            }
            let mut h = h_abs * self.dir;
            let mut t_new = self.t + h;
            if self.dir * (t_new - self.t_bound) > 0.0 {
                t_new = self.t_bound;
            }
            h = t_new - self.t;
            h_abs = h.abs();
            let y_new = self.stages(h);
            let f_new = (self.rhs)(t_new, y_new);
            self.evaluations += 1;
            self.k[N_STAGES] = f_new;
            let err = self.error_norm(h, y_new);
            if !y_new.re.is_finite() || !y_new.im.is_finite() || !err.is_finite() {
                h_abs *= MIN_FACTOR;
                self.rejected = true;
                continue;
            }
            if err < 1.0 {
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-ALPHA) * self.err_prev.powf(BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                let factor = if self.rejected { factor.min(1.0) } else { factor };
                let piece = self.dense(h, y_new, f_new);
                let sc = self.scale(y_new);
                self.local_error = self.local_error.max(err * sc.0.max(sc.1));
                self.t = t_new;
                self.y = y_new;
                self.f = f_new;
                self.h_abs = h_abs * factor;
                self.err_prev = err.max(1e-4);
                self.rejected = false;
                self.steps += 1;
                return Ok(piece);
            }
            h_abs *= (SAFETY * err.powf(-1.0 / 8.0)).max(MIN_FACTOR);
            self.rejected = true;
        }
    }

    fn dense(&mut self, h: f64, y_new: Complex64, f_new: Complex64) -> DensePiece {
        for s in N_STAGES + 1..N_EXT {
            let mut dy = Complex64::new(0.0, 0.0);
            for j in 0..s {
                dy += self.k[j] * A[s][j];
            }
            self.k[s] = (self.rhs)(self.t + C[s] * h, self.y + dy * h);
        }
        self.evaluations += N_EXT - N_STAGES - 1;
        let dy = y_new - self.y;
        let mut f = [Complex64::new(0.0, 0.0); 7];
        f[0] = dy;
        f[1] = self.f * h - dy;
        f[2] = dy * 2.0 - (f_new + self.f) * h;
        for (r, row) in D.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..N_EXT {
                acc += self.k[j] * row[j];
            }
            f[3 + r] = acc * h;
        }
        DensePiece { t_old: self.t, h, y_old: self.y, f }
    }
}
