//! Time-dependent isolating sets, their faces and outward normals.
//!
//! Every region lives in a native frame (see [`RegionTag::frame`]); the
//! `member` query takes a point in that frame. [`member_q`] converts a
//! z-frame point first.

use crate::model::{to_frame, Frame, ModelParams};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use thiserror::Error;

/// Boundary tolerance used by all classifications.
pub const EPS_MEM: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("Z is empty at t = {t}: outside every slab [k pi - beta, k pi + gamma]")]
    QueryOutsideTimeSlab { t: f64 },
    #[error("region {region:?} has no face {face:?}")]
    UnknownFace { region: RegionTag, face: Face },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    U,
    W,
    Z,
    #[serde(rename = "wU")]
    WU,
    #[serde(rename = "pW")]
    PW,
    K,
    L,
    Gamma,
    GammaHat,
    Ktilde,
    Khat,
    Ltilde,
    LtildeUp,
    LtildeLow,
    Kzeta,
}

impl RegionTag {
    pub const ALL: [RegionTag; 15] = [
        RegionTag::U,
        RegionTag::W,
        RegionTag::Z,
        RegionTag::WU,
        RegionTag::PW,
        RegionTag::K,
        RegionTag::L,
        RegionTag::Gamma,
        RegionTag::GammaHat,
        RegionTag::Ktilde,
        RegionTag::Khat,
        RegionTag::Ltilde,
        RegionTag::LtildeUp,
        RegionTag::LtildeLow,
        RegionTag::Kzeta,
    ];

    pub fn frame(self) -> Frame {
        use RegionTag::*;
        match self {
            U | W | Z => Frame::Z,
            WU | K | Kzeta => Frame::W,
            PW | L | Ltilde | LtildeUp | LtildeLow => Frame::P,
            Gamma | GammaHat => Frame::What,
            Ktilde | Khat => Frame::Diff,
        }
    }

    pub fn faces(self) -> &'static [Face] {
        use Face::*;
        use RegionTag::*;
        match self {
            Gamma | GammaHat => &[UpperRay, LowerRay, Cap],
            Ktilde => &[DiagNE, DiagNW, DiagSE, DiagSW, Top, Bottom],
            Khat => &[Top, Bottom],
            LtildeUp => &[Left, Right, Top, Cut],
            LtildeLow => &[Left, Right, Bottom, Cut],
            _ => &[Left, Right, Bottom, Top],
        }
    }
}

/// Face identifiers. Boxes use `Left/Right/Bottom/Top` in their native
/// coordinates; [`face_label`] gives the K1..K4 / L1..L2 names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Face {
    Left,
    Right,
    Bottom,
    Top,
    /// `theta e^{i beta}` ray of the wedge.
    UpperRay,
    /// `theta e^{-i beta}` ray of the wedge.
    LowerRay,
    /// `Re a = 11 beta / 10` end of the wedge.
    Cap,
    DiagNE,
    DiagNW,
    DiagSE,
    DiagSW,
    /// Open side `|Im p| = 4 beta^2` of the half boxes.
    Cut,
}

pub fn face_label(region: RegionTag, face: Face) -> String {
    use Face::*;
    match (region, face) {
        (RegionTag::K, Left) => "K1".into(),
        (RegionTag::K, Right) => "K2".into(),
        (RegionTag::K, Bottom) => "K3".into(),
        (RegionTag::K, Top) => "K4".into(),
        (RegionTag::L, Bottom) => "L1".into(),
        (RegionTag::L, Top) => "L2".into(),
        (RegionTag::L, Left) => "L3".into(),
        (RegionTag::L, Right) => "L4".into(),
        (RegionTag::Ltilde, Bottom) => "Ltilde1".into(),
        (RegionTag::Ltilde, Top) => "Ltilde2".into(),
        (RegionTag::Kzeta, Left) => "Kbeta".into(),
        (RegionTag::Kzeta, Right) => "Ktilde_zeta".into(),
        (r, f) => format!("{r:?}.{f:?}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "face", rename_all = "lowercase")]
pub enum Membership {
    Inside,
    Boundary(Face),
    Outside,
}

impl Membership {
    /// Inside or on the boundary.
    pub fn is_closed_member(self) -> bool {
        !matches!(self, Membership::Outside)
    }
}

/// Piecewise linear half-width of the corridor:
/// `5/28 - 9x/14` on `[-0.5, 0.2]`, `0.05` on `[0.2, 1]`.
pub fn corridor_profile(x: f64) -> f64 {
    if x < 0.2 {
        5.0 / 28.0 - 9.0 * x / 14.0
    } else {
        0.05
    }
}

/// Index `k` of the slab `[k pi - beta, k pi + gamma]` containing `t`.
pub fn z_slab(t: f64, p: &ModelParams) -> Option<i64> {
    let k = (t / PI).round() as i64;
    let s = t - k as f64 * PI;
    let tol = 1e-12 * (1.0 + t.abs());
    if s >= -p.beta - tol && s <= p.gamma + tol {
        Some(k)
    } else {
        None
    }
}

fn wedge_angle(p: &ModelParams) -> f64 {
    p.beta
}

/// Constraint list `(face, g)` with `g <= 0` inside; distances are Euclidean
/// for the straight faces.
pub fn face_functionals(region: RegionTag, t: f64, x: Complex64, p: &ModelParams) -> Result<Vec<(Face, f64)>, GeometryError> {
    use Face::*;
    let b = p.beta;
    let kre = 1.1 * b;
    let kim = 2.0 * b * b;
    let boxc = |hx: f64, hy: f64, x: Complex64| {
        vec![(Left, -hx - x.re), (Right, x.re - hx), (Bottom, -hy - x.im), (Top, x.im - hy)]
    };
    Ok(match region {
        RegionTag::U => boxc(p.a, p.a, (x - 1.0) * Complex64::from_polar(1.0, -0.5 * t)),
        RegionTag::W => boxc(p.a, p.a, (x + 1.0) * Complex64::from_polar(1.0, -0.5 * t)),
        RegionTag::WU | RegionTag::PW => boxc(p.a, p.a, x),
        RegionTag::K => boxc(kre, kim, x),
        RegionTag::L => boxc(kim, kre, x),
        RegionTag::Ltilde => boxc(kre, 3.0 * b, x),
        RegionTag::LtildeUp => {
            let mut c = boxc(kre, 3.0 * b, x);
            c[2] = (Cut, 4.0 * b * b - x.im);
            c
        }
        RegionTag::LtildeLow => {
            let mut c = boxc(kre, 3.0 * b, x);
            c[3] = (Cut, x.im + 4.0 * b * b);
            c
        }
        RegionTag::Kzeta => {
            let zt = crate::certify::zeta_tilde(p);
            vec![(Left, -b - x.re), (Right, x.re - (-b + zt)), (Bottom, -kim - x.im), (Top, x.im - kim)]
        }
        RegionTag::Z => {
            let k = z_slab(t, p).ok_or(GeometryError::QueryOutsideTimeSlab { t })?;
            let sgn = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let l = p.corridor_scale * corridor_profile(sgn * x.re.clamp(-0.5, 1.0));
            vec![(Left, -0.5 - x.re), (Right, x.re - 0.5), (Bottom, -l - x.im), (Top, x.im - l)]
        }
        RegionTag::Gamma | RegionTag::GammaHat => {
            let y = if region == RegionTag::Gamma { x } else { -x };
            let bb = wedge_angle(p);
            // Signed distances to the two rays and the cap.
            let up = Complex64::from_polar(1.0, bb);
            let lo = Complex64::from_polar(1.0, -bb);
            let n_up = Complex64::i() * up;
            let n_lo = -Complex64::i() * lo;
            let d_up = y.re * n_up.re + y.im * n_up.im;
            let d_lo = y.re * n_lo.re + y.im * n_lo.im;
            vec![(UpperRay, d_up), (LowerRay, d_lo), (Cap, y.re - kre)]
        }
        RegionTag::Ktilde | RegionTag::Khat => {
            let s = FRAC_1_SQRT_2;
            // |Im| >= |Re| as four half-planes restricted to their quadrants.
            let ne = if x.re >= 0.0 && x.im >= 0.0 { s * (x.re - x.im) } else { f64::NEG_INFINITY };
            let nw = if x.re <= 0.0 && x.im >= 0.0 { s * (-x.re - x.im) } else { f64::NEG_INFINITY };
            let se = if x.re >= 0.0 && x.im <= 0.0 { s * (x.re + x.im) } else { f64::NEG_INFINITY };
            let sw = if x.re <= 0.0 && x.im <= 0.0 { s * (-x.re + x.im) } else { f64::NEG_INFINITY };
            let mut c = vec![(DiagNE, ne), (DiagNW, nw), (DiagSE, se), (DiagSW, sw)];
            c.push((Top, x.im - kre));
            c.push((Bottom, -kre - x.im));
            c
        }
    })
}

/// Classifies a point given in the region's native frame.
pub fn member(region: RegionTag, t: f64, x: Complex64, p: &ModelParams) -> Result<Membership, GeometryError> {
    let cs = face_functionals(region, t, x, p)?;
    let (face, g) = cs
        .iter()
        .copied()
        .fold((cs[0].0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    let base = if g > EPS_MEM {
        Membership::Outside
    } else if g >= -EPS_MEM {
        Membership::Boundary(face)
    } else {
        Membership::Inside
    };
    Ok(match region {
        // Gamma excludes its apex: Re a must be positive.
        RegionTag::Gamma if x.re <= 0.0 => Membership::Outside,
        RegionTag::GammaHat if x.re >= 0.0 => Membership::Outside,
        // Khat is the cap part of the boundary of Ktilde.
        RegionTag::Khat => match base {
            Membership::Boundary(f @ (Face::Top | Face::Bottom)) => Membership::Boundary(f),
            Membership::Boundary(_) | Membership::Inside => {
                let top = (x.im - 1.1 * p.beta).abs() <= EPS_MEM;
                let bot = (x.im + 1.1 * p.beta).abs() <= EPS_MEM;
                if top {
                    Membership::Boundary(Face::Top)
                } else if bot {
                    Membership::Boundary(Face::Bottom)
                } else {
                    Membership::Outside
                }
            }
            Membership::Outside => Membership::Outside,
        },
        _ => base,
    })
}

/// Classifies a z-frame point, converting to the region's frame first.
/// Regions in the difference frame are not reachable from `q` alone.
pub fn member_q(region: RegionTag, t: f64, q: Complex64, p: &ModelParams) -> Result<Membership, GeometryError> {
    let frame = region.frame();
    let x = match frame {
        Frame::Diff => q,
        _ => to_frame(frame, t, q).expect("non-difference frame"),
    };
    member(region, t, x, p)
}

/// Outward unit normal in the native frame at face parameter `theta`.
pub fn boundary_normal(region: RegionTag, face: Face, theta: f64, t: f64, p: &ModelParams) -> Result<Complex64, GeometryError> {
    if !region.faces().contains(&face) {
        return Err(GeometryError::UnknownFace { region, face });
    }
    use Face::*;
    let axis = |f: Face| match f {
        Left => Complex64::new(-1.0, 0.0),
        Right => Complex64::new(1.0, 0.0),
        Bottom => Complex64::new(0.0, -1.0),
        Cut if region == RegionTag::LtildeUp => Complex64::new(0.0, -1.0),
        _ => Complex64::new(0.0, 1.0),
    };
    let s = FRAC_1_SQRT_2;
    let n = match region {
        RegionTag::U | RegionTag::W => axis(face) * Complex64::from_polar(1.0, 0.5 * t),
        RegionTag::Z => match face {
            Top | Bottom => {
                // Slanted part of the corridor: normal of the line
                // Im = +/- scale * (5/28 - 9/14 * sgn * Re).
                let k = z_slab(t, p).unwrap_or(0);
                let sgn = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let slope = p.corridor_scale * 9.0 / 14.0 * sgn;
                let up = if face == Top { 1.0 } else { -1.0 };
                let v = Complex64::new(slope, up);
                let x = -0.5 + theta.clamp(0.0, 1.0);
                if sgn * x <= 0.2 {
                    v / v.norm()
                } else {
                    Complex64::new(0.0, up)
                }
            }
            _ => axis(face),
        },
        RegionTag::Gamma | RegionTag::GammaHat => {
            let sign = if region == RegionTag::Gamma { 1.0 } else { -1.0 };
            let b = wedge_angle(p);
            let v = match face {
                UpperRay => Complex64::i() * Complex64::from_polar(1.0, b),
                LowerRay => -Complex64::i() * Complex64::from_polar(1.0, -b),
                _ => Complex64::new(1.0, 0.0),
            };
            v * sign
        }
        RegionTag::Ktilde | RegionTag::Khat => match face {
            DiagNE => Complex64::new(s, -s),
            DiagNW => Complex64::new(-s, -s),
            DiagSE => Complex64::new(s, s),
            DiagSW => Complex64::new(-s, s),
            _ => axis(face),
        },
        _ => axis(face),
    };
    Ok(n)
}

/// Point on `face` at parameter `theta in [0, 1]`, in the native frame.
pub fn face_point(region: RegionTag, face: Face, theta: f64, t: f64, p: &ModelParams) -> Result<Complex64, GeometryError> {
    if !region.faces().contains(&face) {
        return Err(GeometryError::UnknownFace { region, face });
    }
    use Face::*;
    let b = p.beta;
    let th = theta.clamp(0.0, 1.0);
    let box_face = |lo_y: f64, hi_y: f64, lo_x: f64, hi_x: f64| -> Complex64 {
        let along_x = lo_x + th * (hi_x - lo_x);
        let along_y = lo_y + th * (hi_y - lo_y);
        match face {
            Left => Complex64::new(lo_x, along_y),
            Right => Complex64::new(hi_x, along_y),
            Bottom => Complex64::new(along_x, lo_y),
            Cut if region == RegionTag::LtildeUp => Complex64::new(along_x, lo_y),
            _ => Complex64::new(along_x, hi_y),
        }
    };
    let kre = 1.1 * b;
    let kim = 2.0 * b * b;
    Ok(match region {
        RegionTag::U | RegionTag::W => {
            let c = if region == RegionTag::U { 1.0 } else { -1.0 };
            let local = box_face(-p.a, p.a, -p.a, p.a);
            local * Complex64::from_polar(1.0, 0.5 * t) + c
        }
        RegionTag::WU | RegionTag::PW => box_face(-p.a, p.a, -p.a, p.a),
        RegionTag::K => box_face(-kim, kim, -kre, kre),
        RegionTag::L => box_face(-kre, kre, -kim, kim),
        RegionTag::Ltilde => box_face(-3.0 * b, 3.0 * b, -kre, kre),
        RegionTag::LtildeUp => box_face(4.0 * b * b, 3.0 * b, -kre, kre),
        RegionTag::LtildeLow => box_face(-3.0 * b, -4.0 * b * b, -kre, kre),
        RegionTag::Kzeta => {
            let zt = crate::certify::zeta_tilde(p);
            box_face(-kim, kim, -b, -b + zt)
        }
        RegionTag::Z => {
            let k = z_slab(t, p).ok_or(GeometryError::QueryOutsideTimeSlab { t })?;
            let sgn = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let l = |x: f64| p.corridor_scale * corridor_profile(sgn * x);
            match face {
                Left => Complex64::new(-0.5, -l(-0.5) + th * 2.0 * l(-0.5)),
                Right => Complex64::new(0.5, -l(0.5) + th * 2.0 * l(0.5)),
                Bottom => {
                    let x = -0.5 + th;
                    Complex64::new(x, -l(x))
                }
                _ => {
                    let x = -0.5 + th;
                    Complex64::new(x, l(x))
                }
            }
        }
        RegionTag::Gamma | RegionTag::GammaHat => {
            let sign = if region == RegionTag::Gamma { 1.0 } else { -1.0 };
            let tmax = kre / b.cos();
            let v = match face {
                UpperRay => Complex64::from_polar(th * tmax, b),
                LowerRay => Complex64::from_polar(th * tmax, -b),
                _ => Complex64::new(kre, (2.0 * th - 1.0) * kre * b.tan()),
            };
            v * sign
        }
        RegionTag::Ktilde | RegionTag::Khat => {
            let s = th * kre;
            match face {
                DiagNE => Complex64::new(s, s),
                DiagNW => Complex64::new(-s, s),
                DiagSE => Complex64::new(s, -s),
                DiagSW => Complex64::new(-s, -s),
                Top => Complex64::new((2.0 * th - 1.0) * kre, kre),
                _ => Complex64::new((2.0 * th - 1.0) * kre, -kre),
            }
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FacePolyline {
    pub face: Face,
    pub label: String,
    pub frame: Frame,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionOutline {
    pub region: RegionTag,
    pub t: f64,
    pub faces: Vec<FacePolyline>,
}

/// Samples every face at `resolution + 1` points (native frame).
pub fn region_outline(region: RegionTag, t: f64, resolution: usize, p: &ModelParams) -> Result<RegionOutline, GeometryError> {
    let n = resolution.max(1);
    let mut faces = Vec::new();
    for &face in region.faces() {
        let mut pts = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let z = face_point(region, face, i as f64 / n as f64, t, p)?;
            pts.push([z.re, z.im]);
        }
        faces.push(FacePolyline { face, label: face_label(region, face), frame: region.frame(), points: pts });
    }
    Ok(RegionOutline { region, t, faces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_continuity() {
        assert!((corridor_profile(0.2) - 0.05).abs() < 1e-15);
        assert_eq!(corridor_profile(-0.5), 5.0 / 28.0 + 9.0 / 28.0);
    }

    #[test]
    fn gamma_apex_excluded() {
        let p = ModelParams::default();
        assert_eq!(member(RegionTag::Gamma, 0.0, Complex64::new(0.0, 0.0), &p).unwrap(), Membership::Outside);
        assert_eq!(member(RegionTag::Gamma, 0.0, Complex64::new(0.005, 0.0), &p).unwrap(), Membership::Inside);
        assert_eq!(member(RegionTag::GammaHat, 0.0, Complex64::new(-0.005, 0.0), &p).unwrap(), Membership::Inside);
    }
}
