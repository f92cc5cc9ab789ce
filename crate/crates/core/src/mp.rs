//! Scalar abstraction over `f64` and a quad-double type.
//!
//! `Qd` carries an unevaluated sum of four doubles, giving roughly 62
//! significant decimal digits. Only the operations the Taylor propagator
//! and the shooting engine need are provided.

use num_traits::{Num, One, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

/// Real scalar used by the generic propagators.
pub trait Real:
    Num
    + Copy
    + Send
    + Sync
    + fmt::Debug
    + PartialOrd
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin_cos(self) -> (Self, Self);
    fn pi() -> Self;
    /// Unit roundoff of the representation.
    fn epsilon() -> f64;
    fn mul_f64(self, x: f64) -> Self {
        self * Self::from_f64(x)
    }
    fn from_i64(n: i64) -> Self {
        Self::from_f64(n as f64)
    }
    /// Decimal rendering with as many digits as the type carries.
    fn to_decimal(self) -> String;
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn epsilon() -> f64 {
        f64::EPSILON / 2.0
    }
    fn to_decimal(self) -> String {
        format!("{:.16e}", self)
    }
}

#[inline(always)]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline(always)]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline(always)]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[inline(always)]
fn three_sum(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let (t1, t2) = two_sum(a, b);
    let (a, t3) = two_sum(c, t1);
    let (b, c) = two_sum(t2, t3);
    (a, b, c)
}

#[inline(always)]
fn three_sum2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let (t1, t2) = two_sum(a, b);
    let (a, t3) = two_sum(c, t1);
    (a, t2 + t3)
}

#[inline(always)]
fn renorm(c0: f64, c1: f64, c2: f64, c3: f64, c4: f64) -> Qd {
    if !c0.is_finite() {
        return Qd([c0, 0.0, 0.0, 0.0]);
    }
    let (s, c4) = quick_two_sum(c3, c4);
    let (s, c3) = quick_two_sum(c2, s);
    let (s, c2) = quick_two_sum(c1, s);
    let (c0, c1) = quick_two_sum(c0, s);

    let mut s0;
    let mut s1;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    (s0, s1) = quick_two_sum(c0, c1);
    if s1 != 0.0 {
        (s1, s2) = quick_two_sum(s1, c2);
        if s2 != 0.0 {
            (s2, s3) = quick_two_sum(s2, c3);
            if s3 != 0.0 {
                s3 += c4;
            } else {
                s2 += c4;
            }
        } else {
            (s1, s2) = quick_two_sum(s1, c3);
            if s2 != 0.0 {
                (s2, s3) = quick_two_sum(s2, c4);
            } else {
                (s1, s2) = quick_two_sum(s1, c4);
            }
        }
    } else {
        (s0, s1) = quick_two_sum(s0, c2);
        if s1 != 0.0 {
            (s1, s2) = quick_two_sum(s1, c3);
            if s2 != 0.0 {
                (s2, s3) = quick_two_sum(s2, c4);
            } else {
                (s1, s2) = quick_two_sum(s1, c4);
            }
        } else {
            (s0, s1) = quick_two_sum(s0, c3);
            if s1 != 0.0 {
                (s1, s2) = quick_two_sum(s1, c4);
            } else {
                (s0, s1) = quick_two_sum(s0, c4);
            }
        }
    }
    Qd([s0, s1, s2, s3])
}

/// Quad-double number: `self.0[0] + self.0[1] + self.0[2] + self.0[3]`,
/// non-overlapping and ordered by decreasing magnitude.
#[derive(Clone, Copy, Default, PartialEq)]
pub struct Qd(pub [f64; 4]);

const QD_PI: Qd = Qd([
    3.141592653589793116e+00,
    1.224646799147353207e-16,
    -2.994769809718339666e-33,
    1.112454220863365282e-49,
]);

impl Qd {
    pub const ZERO: Qd = Qd([0.0; 4]);
    pub const ONE: Qd = Qd([1.0, 0.0, 0.0, 0.0]);

    pub fn new(x: f64) -> Self {
        Qd([x, 0.0, 0.0, 0.0])
    }

    pub fn hi(self) -> f64 {
        self.0[0]
    }

    fn add_f64(self, b: f64) -> Qd {
        let a = self.0;
        let (c0, e) = two_sum(a[0], b);
        let (c1, e) = two_sum(a[1], e);
        let (c2, e) = two_sum(a[2], e);
        let (c3, e) = two_sum(a[3], e);
        renorm(c0, c1, c2, c3, e)
    }

    fn mul_by_f64(self, b: f64) -> Qd {
        let a = self.0;
        let (p0, q0) = two_prod(a[0], b);
        let (p1, q1) = two_prod(a[1], b);
        let (p2, q2) = two_prod(a[2], b);
        let p3 = a[3] * b;
        let s0 = p0;
        let (s1, s2) = two_sum(q0, p1);
        let (s2, q1, p2) = three_sum(s2, q1, p2);
        let (q1, q2) = three_sum2(q1, q2, p3);
        renorm(s0, s1, s2, q1, q2 + p2)
    }

    fn recip_f64_est(self) -> f64 {
        1.0 / self.0[0]
    }

    /// Truncation toward the nearest integer (half away from zero).
    pub fn round(self) -> Qd {
        let x0 = self.0[0].round();
        if x0 == self.0[0] {
            let x1 = self.0[1].round();
            if x1 == self.0[1] {
                let x2 = self.0[2].round();
                if x2 == self.0[2] {
                    let x3 = self.0[3].round();
                    return renorm(x0, x1, x2, x3, 0.0);
                }
                let mut x2 = x2;
                if (x2 - self.0[2]).abs() == 0.5 && self.0[3] < 0.0 {
                    x2 -= 1.0;
                }
                return renorm(x0, x1, x2, 0.0, 0.0);
            }
            let mut x1 = x1;
            if (x1 - self.0[1]).abs() == 0.5 && self.0[2] < 0.0 {
                x1 -= 1.0;
            }
            return renorm(x0, x1, 0.0, 0.0, 0.0);
        }
        let mut x0 = x0;
        if (x0 - self.0[0]).abs() == 0.5 && self.0[1] < 0.0 {
            x0 -= 1.0;
        }
        Qd::new(x0)
    }

    pub fn parse(s: &str) -> Option<Qd> {
        let s = s.trim();
        let (neg, body) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (mant, exp) = match body.find(['e', 'E']) {
            Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
            None => (body, 0),
        };
        let mut acc = Qd::ZERO;
        let mut exp10 = exp;
        let mut seen_dot = false;
        let mut any = false;
        for ch in mant.chars() {
            match ch {
                '.' if !seen_dot => seen_dot = true,
                d if d.is_ascii_digit() => {
                    acc = acc.mul_by_f64(10.0).add_f64(f64::from(d as u8 - b'0'));
                    if seen_dot {
                        exp10 -= 1;
                    }
                    any = true;
                }
                _ => return None,
            }
        }
        if !any {
            return None;
        }
        let p = pow10(exp10.unsigned_abs());
        let v = if exp10 >= 0 { acc * p } else { acc / p };
        Some(if neg { -v } else { v })
    }
}

fn pow10(n: u32) -> Qd {
    let mut r = Qd::ONE;
    let mut b = Qd::new(10.0);
    let mut n = n;
    while n > 0 {
        if n & 1 == 1 {
            r = r * b;
        }
        b = b * b;
        n >>= 1;
    }
    r
}

impl Add for Qd {
    type Output = Qd;
    #[inline]
    fn add(self, b: Qd) -> Qd {
        let a = self.0;
        let b = b.0;
        let (s0, t0) = two_sum(a[0], b[0]);
        let (s1, t1) = two_sum(a[1], b[1]);
        let (s2, t2) = two_sum(a[2], b[2]);
        let (s3, t3) = two_sum(a[3], b[3]);
        let (s1, t0) = two_sum(s1, t0);
        let (s2, t0, t1) = three_sum(s2, t0, t1);
        let (s3, t0) = three_sum2(s3, t0, t2);
        let t0 = t0 + t1 + t3;
        renorm(s0, s1, s2, s3, t0)
    }
}

impl Neg for Qd {
    type Output = Qd;
    #[inline]
    fn neg(self) -> Qd {
        Qd([-self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }
}

impl Sub for Qd {
    type Output = Qd;
    #[inline]
    fn sub(self, b: Qd) -> Qd {
        self + (-b)
    }
}

impl Mul for Qd {
    type Output = Qd;
    #[inline]
    fn mul(self, b: Qd) -> Qd {
        let a = self.0;
        let b = b.0;
        let (p0, q0) = two_prod(a[0], b[0]);
        let (p1, q1) = two_prod(a[0], b[1]);
        let (p2, q2) = two_prod(a[1], b[0]);
        let (p3, q3) = two_prod(a[0], b[2]);
        let (p4, q4) = two_prod(a[1], b[1]);
        let (p5, q5) = two_prod(a[2], b[0]);

        let (p1, p2, q0) = three_sum(p1, p2, q0);

        let (p2, q1, q2) = three_sum(p2, q1, q2);
        let (p3, p4, p5) = three_sum(p3, p4, p5);
        let (s0, t0) = two_sum(p2, p3);
        let (s1, t1) = two_sum(q1, p4);
        let s2 = q2 + p5;
        let (s1, t0) = two_sum(s1, t0);
        let s2 = s2 + (t0 + t1);

        let s1 = s1 + (a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0] + q0 + q3 + q4 + q5);
        renorm(p0, p1, s0, s1, s2)
    }
}

impl Div for Qd {
    type Output = Qd;
    #[inline]
    fn div(self, b: Qd) -> Qd {
        let inv = b.recip_f64_est();
        let q0 = self.0[0] * inv;
        let r = self - b.mul_by_f64(q0);
        let q1 = r.0[0] * inv;
        let r = r - b.mul_by_f64(q1);
        let q2 = r.0[0] * inv;
        let r = r - b.mul_by_f64(q2);
        let q3 = r.0[0] * inv;
        let r = r - b.mul_by_f64(q3);
        let q4 = r.0[0] * inv;
        renorm(q0, q1, q2, q3, q4)
    }
}

impl Rem for Qd {
    type Output = Qd;
    fn rem(self, b: Qd) -> Qd {
        let n = (self / b).trunc();
        self - n * b
    }
}

impl Qd {
    fn trunc(self) -> Qd {
        if self.0[0] >= 0.0 {
            self.floor()
        } else {
            -(-self).floor()
        }
    }

    pub fn floor(self) -> Qd {
        let x0 = self.0[0].floor();
        let mut x = [x0, 0.0, 0.0, 0.0];
        if x0 == self.0[0] {
            x[1] = self.0[1].floor();
            if x[1] == self.0[1] {
                x[2] = self.0[2].floor();
                if x[2] == self.0[2] {
                    x[3] = self.0[3].floor();
                }
            }
            return renorm(x[0], x[1], x[2], x[3], 0.0);
        }
        Qd(x)
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl $tr for Qd {
            #[inline]
            fn $m(&mut self, b: Qd) {
                *self = *self $op b;
            }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /);

impl PartialOrd for Qd {
    fn partial_cmp(&self, other: &Qd) -> Option<Ordering> {
        for i in 0..4 {
            match self.0[i].partial_cmp(&other.0[i])? {
                Ordering::Equal => continue,
                o => return Some(o),
            }
        }
        Some(Ordering::Equal)
    }
}

impl Zero for Qd {
    fn zero() -> Qd {
        Qd::ZERO
    }
    fn is_zero(&self) -> bool {
        self.0[0] == 0.0
    }
}

impl One for Qd {
    fn one() -> Qd {
        Qd::ONE
    }
}

impl Num for Qd {
    type FromStrRadixErr = ();
    fn from_str_radix(s: &str, radix: u32) -> Result<Qd, ()> {
        if radix != 10 {
            return Err(());
        }
        Qd::parse(s).ok_or(())
    }
}

impl fmt::Debug for Qd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Qd({})", self.to_decimal())
    }
}

impl fmt::Display for Qd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

// Taylor coefficients 1/k! for the sine and cosine series.
fn sin_cos_small(x: Qd) -> (Qd, Qd) {
    // |x| <= pi/32 after reduction; 25 terms exceed the working precision.
    let mut sin = Qd::ZERO;
    let mut cos = Qd::ZERO;
    let mut term = Qd::ONE;
    for k in 0..60u32 {
        if k > 0 {
            term = term * x / Qd::new(f64::from(k));
        }
        if term.0[0].abs() < 1e-70 {
            break;
        }
        match k % 4 {
            0 => cos += term,
            1 => sin += term,
            2 => cos -= term,
            _ => sin -= term,
        }
    }
    (sin, cos)
}

impl Real for Qd {
    fn from_f64(x: f64) -> Self {
        Qd::new(x)
    }
    fn to_f64(self) -> f64 {
        self.0[0] + self.0[1]
    }
    fn abs(self) -> Self {
        if self.0[0] < 0.0 {
            -self
        } else {
            self
        }
    }
    fn sqrt(self) -> Self {
        if self.0[0] <= 0.0 {
            return Qd::ZERO;
        }
        // Newton on 1/sqrt(a), then one multiplication.
        let mut r = Qd::new(1.0 / self.0[0].sqrt());
        let half = 0.5;
        for _ in 0..3 {
            let h = (Qd::ONE - self * r * r).mul_by_f64(half);
            r = r + r * h;
        }
        self * r
    }
    fn sin_cos(self) -> (Self, Self) {
        let two_pi = QD_PI.mul_by_f64(2.0);
        let k = (self / two_pi).round();
        let r = self - k * two_pi;
        // Split off a multiple of pi/16, then halve the remainder via tables.
        let step = QD_PI.mul_by_f64(1.0 / 16.0);
        let j = (r / step).round();
        let y = r - j * step;
        let (sy, cy) = sin_cos_small(y);
        let ji = j.0[0] as i64;
        if ji == 0 {
            return (sy, cy);
        }
        let (sj, cj) = sin_cos_small_multiple(ji);
        (sy * cj + cy * sj, cy * cj - sy * sj)
    }
    fn pi() -> Self {
        QD_PI
    }
    fn epsilon() -> f64 {
        1.2154326714572501e-63
    }
    fn mul_f64(self, x: f64) -> Self {
        self.mul_by_f64(x)
    }
    fn to_decimal(self) -> String {
        qd_to_decimal(self, 64)
    }
}

fn sin_cos_small_multiple(j: i64) -> (Qd, Qd) {
    // sin/cos of j*pi/16 by repeated rotation from the series value at pi/16.
    let (s1, c1) = sin_cos_small(QD_PI.mul_by_f64(1.0 / 16.0));
    let mut s = Qd::ZERO;
    let mut c = Qd::ONE;
    let n = j.unsigned_abs();
    for _ in 0..n {
        let ns = s * c1 + c * s1;
        let nc = c * c1 - s * s1;
        s = ns;
        c = nc;
    }
    if j < 0 {
        (-s, c)
    } else {
        (s, c)
    }
}

fn qd_to_decimal(x: Qd, digits: usize) -> String {
    if x.0[0] == 0.0 {
        return "0.0e0".into();
    }
    if !x.0[0].is_finite() {
        return format!("{}", x.0[0]);
    }
    let neg = x.0[0] < 0.0;
    let mut v = x.abs();
    let mut e = v.0[0].log10().floor() as i32;
    let scale = pow10(e.unsigned_abs());
    v = if e >= 0 { v / scale } else { v * scale };
    while v.0[0] >= 10.0 {
        v = v / Qd::new(10.0);
        e += 1;
    }
    while v.0[0] < 1.0 {
        v = v.mul_by_f64(10.0);
        e -= 1;
    }
    let mut ds = Vec::with_capacity(digits + 1);
    for _ in 0..=digits {
        let d = v.0[0].floor().clamp(0.0, 9.0);
        ds.push(d as u8);
        v = (v - Qd::new(d)).mul_by_f64(10.0);
        if v.0[0] < 0.0 {
            // Borrow from the previous digit.
            let mut i = ds.len() - 1;
            loop {
                if ds[i] > 0 {
                    ds[i] -= 1;
                    break;
                }
                ds[i] = 9;
                if i == 0 {
                    break;
                }
                i -= 1;
            }
            v = v + Qd::new(10.0);
        }
    }
    // Round on the last generated digit.
    let last = ds.pop().unwrap_or(0);
    if last >= 5 {
        let mut i = ds.len();
        while i > 0 {
            i -= 1;
            if ds[i] == 9 {
                ds[i] = 0;
            } else {
                ds[i] += 1;
                break;
            }
            if i == 0 {
                ds.insert(0, 1);
                ds.pop();
                e += 1;
            }
        }
    }
    let mut s = String::with_capacity(digits + 8);
    if neg {
        s.push('-');
    }
    s.push((b'0' + ds[0]) as char);
    s.push('.');
    for d in &ds[1..] {
        s.push((b'0' + d) as char);
    }
    s.push('e');
    s.push_str(&e.to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_third_times_three() {
        let third = Qd::ONE / Qd::new(3.0);
        let r = third * Qd::new(3.0) - Qd::ONE;
        assert!(r.abs().0[0] < 1e-62);
    }

    #[test]
    fn sqrt_two_squared() {
        let s = Qd::new(2.0).sqrt();
        assert!((s * s - Qd::new(2.0)).abs().0[0] < 1e-62);
    }

    #[test]
    fn pi_digits() {
        let s = Qd::pi().to_decimal();
        assert!(s.starts_with("3.14159265358979323846264338327950288419716939937510582097494459"));
    }

    #[test]
    fn parse_round_trip() {
        let x = Qd::parse("-1.2345678901234567890123456789012345678901234567890123456789e-3").unwrap();
        let s = x.to_decimal();
        assert!(s.starts_with("-1.234567890123456789012345678901234567890123456789012345678"), "{s}");
    }

    #[test]
    fn sin_cos_identity() {
        for &t in &[0.3, -2.0, 7.5, 100.25, -33.0] {
            let (s, c) = Qd::new(t).sin_cos();
            let one = s * s + c * c;
            assert!((one - Qd::ONE).abs().0[0] < 1e-60, "t={t}");
            assert!((s.to_f64() - t.sin()).abs() < 1e-15);
        }
    }
}
