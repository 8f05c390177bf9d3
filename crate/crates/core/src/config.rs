//! Benchmark configuration. Defaults live in `renet.schema.json` and are
//! filled in from there; nothing else in the crate hardcodes them.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::cv::validate_theta_grid;
use crate::error::{RenetError, Result};
use crate::solver::SolverConfig;

pub const SCHEMA_TEXT: &str = include_str!("../../../renet.schema.json");

pub const MODEL_NAMES: [&str; 5] = ["en", "en1se", "aen", "renet", "renet1se"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub datasets: Vec<String>,
    pub target_col: Option<String>,
    pub models: Vec<String>,
    pub seeds: Vec<u64>,
    pub folds: usize,
    pub alpha: f64,
    pub theta_grid: Vec<f64>,
    pub n_lambda: usize,
    pub se_multiplier: f64,
    pub inner_folds: usize,
    pub aen_gamma: f64,
    pub aen_eps_tol: f64,
    pub preset: Option<String>,
    pub output_dir: String,
    pub solver: SolverConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        validate_config("{}").expect("schema defaults are valid")
    }
}

impl BenchConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let range = |field: &str, msg: String| Err(RenetError::Config(format!("`{field}`: {msg}")));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return range("alpha", format!("{} is outside (0, 1]", self.alpha));
        }
        if self.folds < 2 {
            return range("folds", format!("{} is below 2", self.folds));
        }
        if self.inner_folds < 2 {
            return range("inner_folds", format!("{} is below 2", self.inner_folds));
        }
        if self.n_lambda < 1 {
            return range("n_lambda", "must be at least 1".into());
        }
        if !(self.se_multiplier >= 0.0 && self.se_multiplier.is_finite()) {
            return range("se_multiplier", format!("{} is negative", self.se_multiplier));
        }
        if !(self.aen_gamma > 0.0 && self.aen_gamma.is_finite()) {
            return range("aen_gamma", format!("{} is not positive", self.aen_gamma));
        }
        if !(self.aen_eps_tol > 0.0 && self.aen_eps_tol.is_finite()) {
            return range("aen_eps_tol", format!("{} is not positive", self.aen_eps_tol));
        }
        if let Err(e) = validate_theta_grid(&self.theta_grid) {
            return range("theta_grid", e.to_string());
        }
        if let Some(m) = self.models.iter().find(|m| !MODEL_NAMES.contains(&m.as_str())) {
            return range("models", format!("unknown model `{m}`"));
        }
        if let Some(p) = self.preset.as_deref().filter(|p| *p != "desk") {
            return range("preset", format!("unknown preset `{p}`"));
        }
        if let Err(e) = self.solver.validate() {
            return range("solver", e.to_string());
        }
        Ok(())
    }
}

fn schema() -> &'static Value {
    static SCHEMA: OnceLock<Value> = OnceLock::new();
    SCHEMA.get_or_init(|| serde_json::from_str(SCHEMA_TEXT).expect("schema is valid JSON"))
}

/// Fills missing keys with schema defaults and rejects unknown keys.
fn apply_defaults(obj: &mut Map<String, Value>, props: &Map<String, Value>, path: &str) -> Result<()> {
    if let Some(k) = obj.keys().find(|k| !props.contains_key(*k)) {
        return Err(RenetError::Config(format!("unknown key `{path}{k}`")));
    }
    for (key, prop) in props {
        if !obj.contains_key(key) {
            if let Some(d) = prop.get("default") {
                obj.insert(key.clone(), d.clone());
            }
        }
        if let (Some(Value::Object(inner)), Some(Value::Object(sub))) = (obj.get_mut(key), prop.get("properties")) {
            apply_defaults(inner, sub, &format!("{path}{key}."))?;
        }
    }
    Ok(())
}

/// Parses a JSON config, applies schema defaults and checks ranges.
pub fn validate_config(text: &str) -> Result<BenchConfig> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| {
        RenetError::Config(format!("line {} column {}: {e}", e.line(), e.column()))
    })?;
    let Value::Object(obj) = &mut value else {
        return Err(RenetError::Config("top level must be an object".into()));
    };
    let props = schema()["properties"].as_object().expect("schema properties");
    apply_defaults(obj, props, "")?;
    let cfg: BenchConfig = serde_json::from_value(value).map_err(|e| RenetError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
