//! Run configuration: a TOML file with one table per stage, plus environment
//! overrides.
//!
//! ```toml
//! [model]
//! name = "ei"            # or "oracle"
//! [model.parameters]
//! tau_e = 10.0
//!
//! [cycle]
//! grid_n = 4096
//!
//! [expansion]
//! order = 9
//! representation = "complex"
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Every key has a default; see the `Default` impls. An environment variable
//! `SLOWFOLD_<TABLE>__<KEY>` (double underscore between path segments, case
//! insensitive) replaces the value at that path, e.g.
//! `SLOWFOLD_EXPANSION__ORDER=5` or `SLOWFOLD_MODEL__PARAMETERS__TAU_E=12`.
//! Values are read as TOML literals, falling back to a plain string.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cycle::{CycleSettings, FloquetSettings};
use crate::error::{Error, Result};
use crate::frames::Representation;
use crate::ode::IntegratorSettings;
use crate::validation::{AccuracySettings, SampleSettings, TrajectorySettings, ValidationSettings};

pub const ENV_PREFIX: &str = "SLOWFOLD_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: "ei".into(),
            parameters: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionConfig {
    /// Truncation order L of the manifold and the response functions.
    pub order: usize,
    pub representation: Representation,
    /// b_j for directions 1..d−1; empty selects unit grid-max columns.
    pub scales: Vec<f64>,
    /// Highest |a| examined by the resonance check.
    pub resonance_order: usize,
    pub resonance_tol: f64,
    pub small_divisor_tol: f64,
    pub solvability_tol: f64,
    pub dealias: bool,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            order: 9,
            representation: Representation::Complex,
            scales: Vec::new(),
            resonance_order: 10,
            resonance_tol: 1e-8,
            small_divisor_tol: 1e-8,
            solvability_tol: 1e-9,
            dealias: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Descending.
    pub tolerances: Vec<f64>,
    pub window: f64,
    pub scan_points: usize,
    pub bisection_steps: usize,
    pub samples: usize,
    pub seed: u64,
    pub sample_fraction: (f64, f64),
    pub periods: f64,
    pub checkpoints: usize,
    /// Segments for the fundamental-matrix duality check.
    pub duality_segments: usize,
    /// Thresholds that turn a completed run into a validation failure.
    pub max_orthogonality: f64,
    pub max_directional: f64,
    pub max_conjugacy: f64,
    /// Bound on |Σ(φ_t) − σe^{λ_s t}| / |σ| along sampled trajectories.
    pub max_decay: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        let a = AccuracySettings::default();
        let s = SampleSettings::default();
        let t = TrajectorySettings::default();
        Self {
            tolerances: a.tolerances,
            window: a.window,
            scan_points: a.scan_points,
            bisection_steps: a.bisection_steps,
            samples: s.count,
            seed: s.seed,
            sample_fraction: s.fraction,
            periods: t.periods,
            checkpoints: t.checkpoints,
            duality_segments: 64,
            max_orthogonality: 1e-8,
            max_directional: 1e-7,
            max_conjugacy: 1e-6,
            max_decay: 1e-6,
        }
    }
}

impl ValidationConfig {
    pub fn settings(&self) -> ValidationSettings {
        ValidationSettings {
            accuracy: AccuracySettings {
                tolerances: self.tolerances.clone(),
                window: self.window,
                scan_points: self.scan_points,
                bisection_steps: self.bisection_steps,
            },
            samples: SampleSettings {
                count: self.samples,
                seed: self.seed,
                fraction: self.sample_fraction,
            },
            trajectory: TrajectorySettings {
                periods: self.periods,
                checkpoints: self.checkpoints,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub integrator: IntegratorSettings,
    pub cycle: CycleSettings,
    pub floquet: FloquetSettings,
    pub expansion: ExpansionConfig,
    pub validation: ValidationConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(value)
    }

    /// Parses `text` after applying overrides from `vars`, given as
    /// (name, value) pairs with the prefix already present.
    pub fn from_toml_str_with_env<I>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut vars: Vec<(String, String)> = vars
            .into_iter()
            .filter(|(k, _)| k.to_ascii_uppercase().starts_with(ENV_PREFIX))
            .collect();
        vars.sort();
        for (k, v) in vars {
            apply_override(&mut value, &k[ENV_PREFIX.len()..], &v)?;
        }
        Self::from_value(value)
    }

    /// Reads the file and applies overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str_with_env(&text, std::env::vars())
    }

    fn from_value(value: toml::Value) -> Result<Self> {
        let cfg: RunConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let n = self.cycle.grid_n;
        if n < 8 || !n.is_power_of_two() {
            return bad(format!("cycle.grid_n must be a power of two ≥ 8, got {n}"));
        }
        if self.expansion.order < 1 {
            return bad("expansion.order must be at least 1".into());
        }
        if self.floquet.segments == 0 || !n.is_multiple_of(self.floquet.segments) {
            return bad(format!(
                "floquet.segments ({}) must divide cycle.grid_n ({n})",
                self.floquet.segments
            ));
        }
        let v = &self.validation;
        if !n.is_multiple_of(v.duality_segments.max(1)) || v.duality_segments == 0 {
            return bad("validation.duality_segments must divide cycle.grid_n".into());
        }
        let (lo, hi) = v.sample_fraction;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return bad("validation.sample_fraction must satisfy 0 < lo ≤ hi < 1".into());
        }
        if self.expansion.resonance_order < 2 {
            return bad("expansion.resonance_order must be at least 2".into());
        }
        self.integrator
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.cycle
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        v.settings()
            .accuracy
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn parameter_overrides(&self) -> Vec<(String, f64)> {
        self.model
            .parameters
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    }
}

fn apply_override(root: &mut toml::Value, key: &str, raw: &str) -> Result<()> {
    let path: Vec<String> = key.split("__").map(|s| s.to_ascii_lowercase()).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!(
            "malformed override key '{ENV_PREFIX}{key}'"
        )));
    }
    let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut node = root;
    for (i, seg) in path.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}' descends into a non-table")))?;
        if i + 1 == path.len() {
            table.insert(seg.clone(), parsed);
            return Ok(());
        }
        node = table
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Ok(())
}
