use super::OrbitSegment;
use crate::geometry::{face_functionals, face_label, RegionTag, EPS_MEM};
use crate::model::{from_frame, to_frame, Frame, ModelParams};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Entering,
    Exiting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub region: String,
    pub face: String,
    pub t: f64,
    pub re: f64,
    pub im: f64,
    pub direction: Direction,
}

impl EventRecord {
    pub fn point(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A region described by signed face functionals (`g <= 0` inside).
pub trait EventRegion: Sync {
    fn name(&self) -> String;
    /// Functionals at an orbit point given in `frame`; `None` where the
    /// region is undefined at `t`.
    fn functionals(&self, frame: Option<Frame>, t: f64, x: Complex64) -> Option<Vec<(String, f64)>>;
}

/// One of the named isolating sets.
#[derive(Debug, Clone)]
pub struct NamedRegion {
    pub tag: RegionTag,
    pub params: ModelParams,
}

impl EventRegion for NamedRegion {
    fn name(&self) -> String {
        format!("{:?}", self.tag)
    }

    fn functionals(&self, frame: Option<Frame>, t: f64, x: Complex64) -> Option<Vec<(String, f64)>> {
        let native = self.tag.frame();
        let y = match frame {
            Some(fr) if fr != native && fr != Frame::Diff && native != Frame::Diff => {
                to_frame(native, t, from_frame(fr, t, x).ok()?).ok()?
            }
            _ => x,
        };
        let cs = face_functionals(self.tag, t, y, &self.params).ok()?;
        Some(cs.into_iter().map(|(f, g)| (face_label(self.tag, f), g)).collect())
    }
}

/// Axis-aligned box in the orbit's own coordinates.
#[derive(Debug, Clone)]
pub struct AxisBox {
    pub name: String,
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl EventRegion for AxisBox {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn functionals(&self, _frame: Option<Frame>, _t: f64, x: Complex64) -> Option<Vec<(String, f64)>> {
        Some(vec![
            ("left".into(), self.re.0 - x.re),
            ("right".into(), x.re - self.re.1),
            ("bottom".into(), self.im.0 - x.im),
            ("top".into(), x.im - self.im.1),
        ])
    }
}

const SUBSAMPLES: usize = 8;
const T_TOL: f64 = 1e-12;

fn face_value(region: &dyn EventRegion, orbit: &OrbitSegment, face: &str, t: f64) -> Option<f64> {
    let cs = region.functionals(orbit.frame, t, orbit.point(t))?;
    cs.into_iter().find(|(n, _)| n == face).map(|(_, g)| g).filter(|g| g.is_finite())
}

/// Illinois iteration on a bracketed sign change.
fn polish(mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, g: impl Fn(f64) -> Option<f64>) -> f64 {
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= T_TOL * (1.0 + a.abs()) {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || (c - a) * (c - b) > 0.0 {
            c = 0.5 * (a + b);
        }
        let Some(fc) = g(c) else { break };
        if fc == 0.0 {
            return c;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

/// All crossings of the faces of `regions` along `orbit`, in time order.
pub fn detect_events(orbit: &OrbitSegment, regions: &[&dyn EventRegion]) -> Vec<EventRecord> {
    let mut times = vec![orbit.t0];
    for p in &orbit.pieces {
        for j in 1..=SUBSAMPLES {
            times.push(p.t_old + p.h * j as f64 / SUBSAMPLES as f64);
        }
    }
    let mut out = Vec::new();
    for region in regions {
        let vals: Vec<Option<Vec<(String, f64)>>> =
            times.iter().map(|&t| region.functionals(orbit.frame, t, orbit.point(t))).collect();
        let on_face = |t: f64, face: &str| -> bool {
            region.functionals(orbit.frame, t, orbit.point(t)).is_some_and(|cs| {
                cs.iter().filter(|(n, _)| n != face).all(|(_, g)| !g.is_finite() || *g <= EPS_MEM)
            })
        };
        for i in 1..times.len() {
            let (Some(v0), Some(v1)) = (&vals[i - 1], &vals[i]) else { continue };
            for ((face, g0), (_, g1)) in v0.iter().zip(v1.iter()) {
                if !(g0.is_finite() && g1.is_finite()) {
                    continue;
                }
                let crossing = (*g0 < 0.0 && *g1 >= 0.0) || (*g0 >= 0.0 && *g1 < 0.0);
                if crossing {
                    let tc = polish(times[i - 1], *g0, times[i], *g1, |t| face_value(*region, orbit, face, t));
                    if on_face(tc, face) {
                        let x = orbit.point(tc);
                        let direction = if *g0 < 0.0 { Direction::Exiting } else { Direction::Entering };
                        out.push(EventRecord { region: region.name(), face: face.clone(), t: tc, re: x.re, im: x.im, direction });
                    }
                } else if i + 1 < times.len() && *g1 < 0.0 && *g1 >= -EPS_MEM && *g0 < *g1 {
                    // Tangential contact from inside: a local maximum within the tolerance band.
                    let next = vals[i + 1].as_ref().and_then(|v| v.iter().find(|(n, _)| n == face).map(|c| c.1));
                    if next.is_some_and(|g2| g2 < *g1) && on_face(times[i], face) {
                        let x = orbit.point(times[i]);
                        for direction in [Direction::Entering, Direction::Exiting] {
                            out.push(EventRecord { region: region.name(), face: face.clone(), t: times[i], re: x.re, im: x.im, direction });
                        }
                    }
                }
            }
        }
    }
    let fwd = orbit.t1 >= orbit.t0;
    out.sort_by(|a, b| if fwd { a.t.total_cmp(&b.t) } else { b.t.total_cmp(&a.t) });
    out
}
