//! Taylor-series propagator for the unperturbed z-frame equation, generic
//! over the scalar type. With [`Qd`](crate::mp::Qd) it keeps about 62
//! digits across many windows of exponential stretching.

use super::FlowError;
use crate::mp::Real;
use num_complex::{Complex, Complex64};

/// One accepted Taylor step: `z(t0 + s) = sum c_k s^k` for `s` in `[0, h]`
/// (or `[h, 0]` backwards).
#[derive(Debug, Clone)]
pub struct TaylorStep<T: Real> {
    pub t0: T,
    pub h: T,
    pub coeffs: Vec<Complex<T>>,
    coeffs_f64: Vec<Complex64>,
    t0_f64: f64,
}

impl<T: Real> TaylorStep<T> {
    pub fn eval(&self, t: T) -> Complex<T> {
        let s = t - self.t0;
        let mut acc = Complex::new(T::zero(), T::zero());
        for c in self.coeffs.iter().rev() {
            acc = Complex::new(acc.re * s + c.re, acc.im * s + c.im);
        }
        acc
    }

    /// Evaluation with coefficients rounded to `f64`.
    pub fn eval_f64(&self, t: f64) -> Complex64 {
        let s = t - self.t0_f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs_f64.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    pub fn end(&self) -> Complex<T> {
        self.eval(self.t0 + self.h)
    }
}

#[derive(Debug, Clone)]
pub struct TaylorOrbit<T: Real> {
    pub t0: T,
    pub t1: T,
    pub z0: Complex<T>,
    pub steps: Vec<TaylorStep<T>>,
}

impl<T: Real> TaylorOrbit<T> {
    pub fn end(&self) -> Complex<T> {
        self.steps.last().map_or(self.z0, |s| s.end())
    }

    fn index_f64(&self, t: f64) -> usize {
        let fwd = self.t1 >= self.t0;
        let i = self.steps.partition_point(|s| {
            let e = s.t0_f64 + s.h.to_f64();
            if fwd {
                e < t
            } else {
                e > t
            }
        });
        i.min(self.steps.len().saturating_sub(1))
    }

    /// Dense value in `f64`, clamped to the orbit's time span.
    pub fn point_f64(&self, t: f64) -> Complex64 {
        if self.steps.is_empty() {
            return Complex64::new(self.z0.re.to_f64(), self.z0.im.to_f64());
        }
        self.steps[self.index_f64(t)].eval_f64(t)
    }

    /// Dense value at full precision.
    pub fn point(&self, t: T) -> Complex<T> {
        if self.steps.is_empty() {
            return self.z0;
        }
        let i = self.index_f64(t.to_f64());
        self.steps[i].eval(t)
    }
}

/// Order from the target accuracy: `-ln(eps)/2 + 1`.
pub fn taylor_order<T: Real>() -> usize {
    (-0.5 * T::epsilon().ln()).ceil() as usize + 1
}

/// Coefficients of the local series of `z' = R e^{it} (conj(z)^2 - 1)` at `(t0, z0)`.
pub fn series<T: Real>(t0: T, z0: Complex<T>, r: T, order: usize) -> Vec<Complex<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    let (s, c) = t0.sin_cos();
    let mut ec = Vec::with_capacity(order + 1);
    ec.push(Complex::new(c, s));
    for k in 1..=order {
        let prev: Complex<T> = ec[k - 1];
        let kk = T::from_i64(k as i64);
        // Multiply by i / k.
        ec.push(Complex::new(-prev.im / kk, prev.re / kk));
    }
    let mut z = Vec::with_capacity(order + 1);
    let mut zc = Vec::with_capacity(order + 1);
    let mut g: Vec<Complex<T>> = Vec::with_capacity(order + 1);
    z.push(z0);
    zc.push(z0.conj());
    for k in 0..order {
        // g_k = sum_j conj(z_j) conj(z_{k-j}) - [k = 0]
        let mut gk = zero;
        let half = k / 2;
        for j in 0..=half {
            let a: Complex<T> = zc[j];
            let b: Complex<T> = zc[k - j];
            let term = a * b;
            if 2 * j == k {
                gk = gk + term;
            } else {
                gk = gk + term + term;
            }
        }
        if k == 0 {
            gk.re -= T::one();
        }
        g.push(gk);
        let mut acc = zero;
        for j in 0..=k {
            acc = acc + ec[j] * g[k - j];
        }
        let f = r / T::from_i64(k as i64 + 1);
        let next = Complex::new(acc.re * f, acc.im * f);
        z.push(next);
        zc.push(next.conj());
    }
    z
}

fn norm1<T: Real>(c: &Complex<T>) -> f64 {
    c.re.to_f64().abs().max(c.im.to_f64().abs())
}

/// Integrates from `(t0, z0)` to `t1`; `limit` bounds `|z|`.
pub fn taylor_integrate<T: Real>(t0: T, z0: Complex<T>, t1: T, r: f64, limit: f64) -> Result<TaylorOrbit<T>, FlowError> {
    match taylor_integrate_partial(t0, z0, t1, r, limit) {
        (orb, None) => Ok(orb),
        (_, Some(e)) => Err(e),
    }
}

/// Keeps the steps taken before `|z|` reached `limit`; `t1` of the result
/// is where integration stopped.
pub fn taylor_integrate_partial<T: Real>(t0: T, z0: Complex<T>, t1: T, r: f64, limit: f64) -> (TaylorOrbit<T>, Option<FlowError>) {
    let order = taylor_order::<T>();
    let rr = T::from_f64(r);
    let dir = if t1 >= t0 { T::one() } else { -T::one() };
    let mut t = t0;
    let mut z = z0;
    let mut steps = Vec::new();
    let e2 = std::f64::consts::E * std::f64::consts::E;
    loop {
        let remaining = (t1 - t).abs();
        if remaining.to_f64() <= 0.0 {
            break;
        }
        let coeffs = series(t, z, rr, order);
        let scale = norm1(&coeffs[0]).max(1.0);
        let rho = |j: usize| {
            let n = norm1(&coeffs[j]) / scale;
            if n == 0.0 {
                f64::INFINITY
            } else {
                n.powf(-1.0 / j as f64)
            }
        };
        let mut h = (rho(order - 1).min(rho(order)) / e2).min(1.0);
        if !h.is_finite() || h <= 0.0 {
            h = 1.0;
        }
        let mut ht = T::from_f64(h);
        let last = ht >= remaining;
        if last {
            ht = remaining;
        }
        let hs = ht * dir;
        let step = TaylorStep {
            t0: t,
            h: hs,
            coeffs_f64: coeffs.iter().map(|c| Complex64::new(c.re.to_f64(), c.im.to_f64())).collect(),
            t0_f64: t.to_f64(),
            coeffs,
        };
        z = step.end();
        t = if last { t1 } else { t + hs };
        steps.push(step);
        let zn = Complex64::new(z.re.to_f64(), z.im.to_f64());
        if !(zn.norm() < limit) {
            return (TaylorOrbit { t0, t1: t, z0, steps }, Some(FlowError::BlowUp { t: t.to_f64(), z: zn }));
        }
        if last {
            break;
        }
    }
    (TaylorOrbit { t0, t1, z0, steps }, None)
}

/// Flow over `[t0, t1]` together with its real 2x2 Jacobian
/// `[[dRe/dx, dRe/dy], [dIm/dx, dIm/dy]]`, from the variational equation
/// `v' = 2R e^{it} conj(z) conj(v)`.
pub fn taylor_flow_jacobian(t0: f64, z0: Complex64, t1: f64, r: f64, limit: f64) -> Result<(Complex64, [[f64; 2]; 2]), FlowError> {
    let order = taylor_order::<f64>();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let e2 = std::f64::consts::E * std::f64::consts::E;
    let mut t = t0;
    let mut z = z0;
    let mut v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
    while (t1 - t) * dir > 0.0 {
        let zs = series(t, z, r, order);
        let scale = norm1(&zs[0]).max(1.0);
        let rho = |j: usize| {
            let n = norm1(&zs[j]) / scale;
            if n == 0.0 {
                f64::INFINITY
            } else {
                n.powf(-1.0 / j as f64)
            }
        };
        let mut h = (rho(order - 1).min(rho(order)) / e2).min(1.0);
        if !h.is_finite() || h <= 0.0 {
            h = 1.0;
        }
        let h = h.min((t1 - t).abs()) * dir;
        let (sn, cs) = t.sin_cos();
        let mut ec = vec![Complex64::new(cs, sn)];
        for k in 1..=order {
            ec.push(ec[k - 1] * Complex64::new(0.0, 1.0 / k as f64));
        }
        for vi in v.iter_mut() {
            let mut vs = vec![*vi];
            for k in 0..order {
                // (conj z * conj v)_k, then convolve with the exponential.
                let m: Vec<Complex64> = (0..=k).map(|i| (0..=i).map(|j| zs[j].conj() * vs[i - j].conj()).sum()).collect();
                let acc: Complex64 = (0..=k).map(|j| ec[j] * m[k - j]).sum();
                vs.push(acc * (2.0 * r / (k as f64 + 1.0)));
            }
            *vi = vs.iter().rev().fold(Complex64::new(0.0, 0.0), |a, c| a * h + c);
        }
        z = zs.iter().rev().fold(Complex64::new(0.0, 0.0), |a, c| a * h + c);
        t = if ((t1 - t) * dir - h.abs()).abs() <= 0.0 || (t + h - t1) * dir >= 0.0 { t1 } else { t + h };
        if !(z.norm() < limit) {
            return Err(FlowError::BlowUp { t, z });
        }
    }
    Ok((z, [[v[0].re, v[1].re], [v[0].im, v[1].im]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp::Qd;

    #[test]
    fn equilibrium_is_fixed() {
        let orb = taylor_integrate(0.0f64, Complex::new(1.0, 0.0), 3.0, 2.0, 10.0).unwrap();
        assert!((orb.end() - Complex::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matches_rk() {
        let p = crate::model::ModelParams::exploration(2.0);
        let f = crate::model::Perturbation::zero();
        let z0 = Complex64::new(0.3, 0.1);
        let rk = crate::flow::integrate(crate::model::Frame::Z, 0.0, z0, 0.7, &p, &f, crate::flow::Tolerance::tight()).unwrap();
        let ty = taylor_integrate(0.0f64, z0, 0.7, 2.0, 10.0).unwrap();
        assert!((rk.end() - ty.end()).norm() < 1e-10);
        let tq = taylor_integrate(Qd::ZERO, Complex::new(Qd::new(0.3), Qd::new(0.1)), Qd::new(0.7), 2.0, 10.0).unwrap();
        let e = tq.end();
        assert!((Complex64::new(e.re.to_f64(), e.im.to_f64()) - ty.end()).norm() < 1e-12);
        assert!((ty.point_f64(0.35) - rk.point(0.35)).norm() < 1e-10);
        let (end, jac) = taylor_flow_jacobian(0.0, z0, 0.7, 2.0, 10.0).unwrap();
        assert!((end - ty.end()).norm() < 1e-12);
        let d = 1e-6;
        let fx = taylor_integrate(0.0f64, z0 + d, 0.7, 2.0, 10.0).unwrap().end();
        let fy = taylor_integrate(0.0f64, z0 + Complex64::new(0.0, d), 0.7, 2.0, 10.0).unwrap().end();
        let gx = (fx - ty.end()) / d;
        let gy = (fy - ty.end()) / d;
        let scale = gx.norm().max(gy.norm());
        assert!((gx.re - jac[0][0]).abs() < 1e-4 * scale && (gx.im - jac[1][0]).abs() < 1e-4 * scale);
        assert!((gy.re - jac[0][1]).abs() < 1e-4 * scale && (gy.im - jac[1][1]).abs() < 1e-4 * scale);
    }
}
