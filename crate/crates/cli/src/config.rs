//! JSON run configuration with strict key checking and defaults.

use std::path::PathBuf;

use plurisym::flow::FlowConfig;
use plurisym::torus::TorusGrid;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    FlatKahler,
    /// `Ω₀ = ω_flat + d(ζ + ζ̄)`, non-Kähler in general.
    PerturbedFlat,
    /// `ω₀ = ω_flat + √−1∂∂̄u`, `φ₀ = 0`.
    PerturbedKahler,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    #[serde(rename = "type")]
    pub kind: InitialKind,
    pub epsilon: f64,
    pub seed: u64,
    pub mode_cutoff: usize,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig { kind: InitialKind::PerturbedFlat, epsilon: 0.05, seed: 42, mode_cutoff: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub dt: f64,
    pub steps: usize,
    pub sample_every: usize,
    pub safety: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        let f = FlowConfig::default();
        FlowSection { dt: f.dt, steps: f.steps, sample_every: f.sample_every, safety: f.safety }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Abort threshold for `‖dΩ‖`, `‖∂ω+∂̄φ‖` and `‖∂φ‖` during a run.
    pub constraint: f64,
    pub beta_pluriclosed: f64,
    /// Relative error of the finite-difference derivative checks.
    pub derivative_identity: f64,
    pub fit_residual: f64,
    /// `|aₙ| ≤ leading_coefficient · a₀` for the fitted top coefficient.
    pub leading_coefficient: f64,
    /// Fitted versus formula `a₀`, relative.
    pub constant_term: f64,
    /// Fitted versus formula `aᵢ`, `0 < i < n`, relative to the larger of
    /// the coefficient and its integrand scale.
    pub coefficient_match: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            constraint: FlowConfig::default().constraint_tolerance,
            beta_pluriclosed: 1e-8,
            derivative_identity: 1e-4,
            fit_residual: 1e-6,
            leading_coefficient: 1e-6,
            constant_term: 1e-10,
            coefficient_match: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    /// Points per axis; 16 in dimension two and 8 in dimension three when
    /// omitted.
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dimension: 2,
            grid: None,
            initial: InitialConfig::default(),
            flow: FlowSection::default(),
            tolerances: Tolerances::default(),
            output: None,
            format: None,
        }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::Config(inner.to_string())
            } else {
                CliError::Config(format!("{path}: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid_size(&self) -> usize {
        self.grid.unwrap_or(if self.dimension == 2 { 16 } else { 8 })
    }

    pub fn torus(&self) -> Result<TorusGrid, CliError> {
        TorusGrid::new(self.dimension, self.grid_size()).map_err(|e| bad("grid", e))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(2..=3).contains(&self.dimension) {
            return Err(bad("dimension", format!("{} out of range (supported: 2, 3)", self.dimension)));
        }
        self.torus()?;
        let i = &self.initial;
        if !(i.epsilon >= 0.0 && i.epsilon.is_finite()) {
            return Err(bad("initial.epsilon", format!("must be nonnegative and finite, got {}", i.epsilon)));
        }
        let cutoff = self.torus()?.cutoff();
        if i.mode_cutoff == 0 || i.mode_cutoff > cutoff {
            return Err(bad("initial.mode_cutoff", format!("must lie in 1..={cutoff}, got {}", i.mode_cutoff)));
        }
        let f = &self.flow;
        positive("flow.dt", f.dt)?;
        if f.steps == 0 {
            return Err(bad("flow.steps", "must be at least 1"));
        }
        if f.sample_every == 0 {
            return Err(bad("flow.sample_every", "must be at least 1"));
        }
        if !(f.safety > 0.0 && f.safety <= 1.0) {
            return Err(bad("flow.safety", format!("must lie in (0, 1], got {}", f.safety)));
        }
        let t = &self.tolerances;
        for (k, v) in [
            ("tolerances.constraint", t.constraint),
            ("tolerances.beta_pluriclosed", t.beta_pluriclosed),
            ("tolerances.derivative_identity", t.derivative_identity),
            ("tolerances.fit_residual", t.fit_residual),
            ("tolerances.leading_coefficient", t.leading_coefficient),
            ("tolerances.constant_term", t.constant_term),
            ("tolerances.coefficient_match", t.coefficient_match),
        ] {
            positive(k, v)?;
        }
        Ok(())
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            dt: self.flow.dt,
            steps: self.flow.steps,
            sample_every: self.flow.sample_every,
            safety: self.flow.safety,
            constraint_tolerance: self.tolerances.constraint,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::parse(r#"{"dimension": 2}"#).unwrap();
        assert_eq!(c.grid_size(), 16);
        assert_eq!(c.flow.dt, 1e-4);
        assert_eq!(c.initial.epsilon, 0.05);
        assert_eq!(c.initial.seed, 42);
        assert_eq!(RunConfig::parse(r#"{"dimension": 3}"#).unwrap().grid_size(), 8);
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::parse(r#"{"dimension": 5}"#).unwrap_err().to_string();
        assert!(e.contains("dimension") && e.contains("supported: 2, 3"), "{e}");
        let e = RunConfig::parse(r#"{"dimension": 2, "flow": {"steps": -1}}"#).unwrap_err().to_string();
        assert!(e.contains("flow.steps"), "{e}");
        let e = RunConfig::parse(r#"{"dimension": 2, "initial": {"colour": 1}}"#).unwrap_err().to_string();
        assert!(e.contains("initial") && e.contains("colour"), "{e}");
        let e = RunConfig::parse(r#"{"dimension": 2, "flow": {"dt": 0}}"#).unwrap_err().to_string();
        assert!(e.contains("flow.dt"), "{e}");
        assert!(RunConfig::parse("{").is_err());
        assert!(RunConfig::parse("{}").unwrap_err().to_string().contains("dimension"));
    }
}
