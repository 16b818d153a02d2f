//! Run configuration: a JSON file plus command-line overrides.

use crate::error::{Error, Result};
use crate::geometry::{ShapeSpec, SupportBody};
use crate::gibbs::PerturbationWeight;
use crate::jump::JumpMode;
use crate::md::Mode;
use crate::ou::OuVariant;
use crate::scattering::SimParams;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

/// Whether pathological collisions stop a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Plain,
    Killed,
}

impl RunMode {
    pub fn md(self) -> Mode {
        match self {
            RunMode::Plain => Mode::Full,
            RunMode::Killed => Mode::Killed,
        }
    }

    pub fn jump(self) -> JumpMode {
        match self {
            RunMode::Plain => JumpMode::Plain,
            RunMode::Killed => JumpMode::Killed,
        }
    }
}

fn default_n() -> usize {
    500
}
fn default_alpha() -> f64 {
    0.1
}
fn default_beta() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    0.1
}
fn default_body() -> ShapeSpec {
    ShapeSpec::Ellipse { a: 0.5, b: 0.3 }
}
fn default_t_end() -> f64 {
    5.0
}
fn default_sample_dt() -> f64 {
    0.05
}
fn default_replicas() -> usize {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(rename = "N", alias = "n", default = "default_n")]
    pub n_atoms: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Atom diameter; filled in as `1/N` when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_body")]
    pub body: ShapeSpec,
    /// Overrides the uniform-density moment of inertia.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub ou_variant: OuVariant,
    #[serde(rename = "T", alias = "t_end", default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads for replica parallelism; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub perturbation: PerturbationWeight,
    /// Window length for velocity increments in `compare`; `min(0.5, T)`
    /// when absent.
    #[serde(default)]
    pub window: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_value(Value::Object(Map::new())).expect("defaults are valid")
    }
}

impl RunConfig {
    /// Deserializes, fills defaults and validates.
    pub fn from_value(v: Value) -> Result<Self> {
        let mut cfg: RunConfig =
            serde_json::from_value(v).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        Self::from_value(v)
    }

    /// Reads an optional file and applies `overrides` (flags win) on top.
    pub fn load(path: Option<&Path>, overrides: Map<String, Value>) -> Result<Self> {
        let mut base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                match serde_json::from_str::<Value>(&text)
                    .map_err(|e| Error::config("config", format!("{}: {e}", p.display())))?
                {
                    Value::Object(m) => m,
                    _ => return Err(Error::config("config", "top level must be a JSON object")),
                }
            }
            None => Map::new(),
        };
        base.extend(overrides);
        Self::from_value(Value::Object(base))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&mut self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::config("N", "must be positive"));
        }
        let eps = 1.0 / self.n_atoms as f64;
        match self.epsilon {
            None => self.epsilon = Some(eps),
            Some(e) if (e * self.n_atoms as f64 - 1.0).abs() > 1e-9 => {
                return Err(Error::config(
                    "epsilon",
                    format!("Boltzmann-Grad scaling needs Nε = 1, got N·ε = {}", e * self.n_atoms as f64),
                ));
            }
            Some(_) => {}
        }
        if !(self.eta > 0.0 && self.eta < 1.0 / 6.0) {
            return Err(Error::config(
                "eta",
                format!("the no-recollision estimate needs 0 < η < 1/6, got {}", self.eta),
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("T", "must be positive"));
        }
        if !(self.sample_dt > 0.0) {
            return Err(Error::config("sample_dt", "must be positive"));
        }
        let window = *self.window.get_or_insert(self.t_end.min(0.5));
        if !(window > 0.0 && window <= self.t_end) {
            return Err(Error::config("window", "must lie in (0, T]"));
        }
        if self.replicas == 0 {
            return Err(Error::config("replicas", "must be positive"));
        }
        self.perturbation.validate()?;
        // Surface geometry and parameter errors before any run starts.
        self.sim_params()?;
        Ok(())
    }

    pub fn support_body(&self) -> Result<SupportBody> {
        let body = SupportBody::new(&self.body)?;
        match self.inertia {
            Some(i) => body.with_inertia(i),
            None => Ok(body),
        }
    }

    pub fn sim_params(&self) -> Result<SimParams> {
        SimParams::new(self.n_atoms, self.alpha, self.beta, self.eta, self.support_body()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_defaults_to_inverse_n() {
        let c = RunConfig::from_json_str(
            r#"{"N": 500, "alpha": 0.1, "beta": 1, "body": {"kind": "disk", "radius": 1}}"#,
        )
        .unwrap();
        assert_eq!(c.epsilon, Some(1.0 / 500.0));
        assert_eq!(c.sim_params().unwrap().epsilon * 500.0, 1.0);
    }

    #[test]
    fn rejects_large_eta_and_wrong_epsilon() {
        let e = RunConfig::from_json_str(r#"{"eta": 0.2}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "eta"), "{e}");
        assert!(e.to_string().contains("1/6"));
        let e = RunConfig::from_json_str(r#"{"N": 100, "epsilon": 0.02}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "epsilon"));
        assert!(RunConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::from_json_str(
            r#"{"N": 1000, "alpha": 0.15, "body": {"kind": "ellipse", "a": 0.5, "b": 0.3},
                "inertia": 0.1, "mode": "killed", "ou_variant": "printed", "T": 3,
                "replicas": 7, "seed": 9, "perturbation": {"kind": "cosine_x", "amplitude": 0.3}}"#,
        )
        .unwrap();
        let again = RunConfig::from_json_str(&c.to_json()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"N": 200, "alpha": 0.2, "seed": 3}"#).unwrap();
        let mut o = Map::new();
        o.insert("seed".into(), Value::from(11u64));
        let c = RunConfig::load(Some(&path), o).unwrap();
        assert_eq!((c.n_atoms, c.alpha, c.seed), (200, 0.2, 11));
    }
}
