//! Flat JSON run configuration. Defaults, then the config file, then flags.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use wazcode::flow::Tolerance;
use wazcode::model::{Mode, ModelParams, Perturbation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: String,
    pub mode: Option<Mode>,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub a: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub corridor_scale: Option<f64>,
    pub perturbation: String,
    pub eps: f64,
    pub rtol: f64,
    pub atol: f64,
    pub out: String,
    pub svg: bool,
    pub threads: Option<usize>,

    pub frame: String,
    pub x0_re: f64,
    pub x0_im: f64,
    pub t0: f64,
    pub t1: Option<f64>,
    pub samples: usize,
    pub iterations: usize,
    pub periodic: bool,

    pub shot: Option<String>,
    pub q_re: Option<String>,
    pub q_im: Option<String>,
    pub k_lo: Option<i64>,
    pub k_hi: Option<i64>,
    pub steps: usize,

    pub r_max: Option<f64>,

    pub word: Option<String>,
    pub graph: String,
    pub margin: i64,
    pub right_min: i64,

    pub power: u32,

    pub pair: String,
    pub n_max: usize,
    pub tail_fraction: f64,
    pub stride: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tol = Tolerance::default();
        RunConfig {
            command: String::new(),
            mode: None,
            r: 2.0,
            n: 0.0,
            a: None,
            beta: None,
            gamma: None,
            delta: None,
            corridor_scale: None,
            perturbation: "zero".into(),
            eps: 0.0,
            rtol: tol.rtol,
            atol: tol.atol,
            out: "out".into(),
            svg: false,
            threads: None,
            frame: "z".into(),
            x0_re: 1.0,
            x0_im: 0.0,
            t0: 0.0,
            t1: None,
            samples: 1000,
            iterations: 1,
            periodic: false,
            shot: None,
            q_re: None,
            q_im: None,
            k_lo: None,
            k_hi: None,
            steps: 0,
            r_max: None,
            word: None,
            graph: "default".into(),
            margin: 1,
            right_min: 0,
            power: 1,
            pair: "four-power".into(),
            n_max: 1 << 16,
            tail_fraction: 1.0 / 64.0,
            stride: 64,
        }
    }
}

impl RunConfig {
    /// Merges defaults, the flat JSON object in `file` and `flags`.
    pub fn resolve(command: &str, file: Option<&str>, flags: Map<String, Value>) -> Result<Self, String> {
        let mut merged = match file {
            Some(text) => match serde_json::from_str::<Value>(text).map_err(|e| format!("config: {e}"))? {
                Value::Object(m) => m,
                _ => return Err("config: expected a JSON object".into()),
            },
            None => Map::new(),
        };
        if let Some((k, _)) = merged.iter().find(|(_, v)| v.is_object() || v.is_array()) {
            return Err(format!("config: key {k} is nested; the file must be flat"));
        }
        for (k, v) in flags {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
        merged.insert("command".into(), Value::String(command.into()));
        serde_json::from_value(Value::Object(merged)).map_err(|e| format!("config: {e}"))
    }

    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(if self.command == "certify" { Mode::Certification } else { Mode::Exploration })
    }

    pub fn params(&self) -> Result<ModelParams, String> {
        let mut p = match self.mode() {
            Mode::Certification => ModelParams { r: self.r, n: self.n, ..ModelParams::default() },
            Mode::Exploration => ModelParams { n: self.n, ..ModelParams::exploration(self.r) },
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.a, self.a);
        set(&mut p.beta, self.beta);
        set(&mut p.gamma, self.gamma);
        set(&mut p.delta, self.delta);
        set(&mut p.corridor_scale, self.corridor_scale);
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }

    pub fn perturbation(&self) -> Result<Perturbation, String> {
        Perturbation::from_catalog(&self.perturbation, self.eps).map_err(|e| e.to_string())
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance { rtol: self.rtol, atol: self.atol }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let mut flags = Map::new();
        flags.insert("R".into(), Value::from(5.0));
        flags.insert("beta".into(), Value::Null);
        let c = RunConfig::resolve("integrate", Some(r#"{"R": 3.0, "beta": 0.05, "samples": 10}"#), flags).unwrap();
        assert_eq!(c.r, 5.0);
        assert_eq!(c.beta, Some(0.05));
        assert_eq!(c.samples, 10);
        assert_eq!(c.command, "integrate");
        let back: RunConfig = serde_json::from_value(c.to_value()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_nested_and_unknown() {
        assert!(RunConfig::resolve("code", Some(r#"{"x": {"y": 1}}"#), Map::new()).is_err());
        assert!(RunConfig::resolve("code", Some(r#"{"colour": 1}"#), Map::new()).is_err());
    }

    #[test]
    fn certification_mode_checks_regime() {
        let c = RunConfig::resolve("certify", None, Map::new()).unwrap();
        assert!(c.params().is_err());
        let ok = RunConfig { r: 100.0, n: 1.0, ..c.clone() };
        assert!(ok.params().is_ok());
        let bad = RunConfig { r: 100.0, n: 2.0, ..c };
        assert!(bad.params().is_err());
    }
}
