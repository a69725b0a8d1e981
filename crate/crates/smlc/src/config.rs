//! Scenario configuration: built-in presets, the line-based `key = value`
//! config format, and its canonical serialization (also used as the trace
//! header block, so a written trace round-trips back into a config).

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::controller::SmlcConfig;
use crate::plants::plant_by_name;
use crate::sim::ScenarioConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for '{key}': {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing mandatory key 'plant'")]
    MissingPlant,
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Neutral defaults; `plant` stays mandatory.
fn base_config() -> ScenarioConfig {
    ScenarioConfig {
        plant_name: String::new(),
        dt: 0.01,
        horizon: 20.0,
        x0: Vec::new(),
        smlc: SmlcConfig {
            lambda: 1.0,
            order: 2,
            gamma_k: 0.1,
            gamma_alpha: 0.1,
            chi: 0.05,
            epsilon: 0.001,
            denom_clamp: 0.001,
        },
        k0: 1.0,
        alpha0: 1.0,
        q0: 0.5,
        input_range: 1.0,
        snr_db: None,
        seed: 42,
        disturbance_on: false,
        headway: 0.5,
    }
}

/// Built-in scenario presets.
///
/// `scenario1`: vehicle-following run with the ramp reference and the
/// sinusoidal disturbance. `scenario2`: second-order regulation run from
/// x(0) = [1, -1] with 50 dB measurement noise.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let mut cfg = base_config();
    match name {
        "scenario1" => {
            cfg.plant_name = "acc".into();
            cfg.horizon = 60.0;
            cfg.x0 = vec![0.0, 0.0, 0.0];
            cfg.smlc.lambda = 1.0;
            cfg.smlc.order = 3;
            cfg.smlc.gamma_k = 0.1;
            cfg.smlc.gamma_alpha = 0.1;
            cfg.k0 = 1.0;
            cfg.alpha0 = 3.0;
            cfg.q0 = 0.5;
            cfg.input_range = 1.0;
            cfg.snr_db = None;
            cfg.disturbance_on = true;
            Some(cfg)
        }
        "scenario2" => {
            cfg.plant_name = "numeric2".into();
            cfg.horizon = 20.0;
            cfg.x0 = vec![1.0, -1.0];
            cfg.smlc.lambda = 2.0;
            cfg.smlc.order = 2;
            cfg.smlc.gamma_k = 1.0;
            cfg.smlc.gamma_alpha = 0.1;
            cfg.k0 = 1.0;
            cfg.alpha0 = 0.03;
            cfg.q0 = 0.5;
            // initial memberships spread wide enough that no normalized
            // distance starts near the width-law singularity
            cfg.input_range = 2.0;
            cfg.snr_db = Some(50.0);
            cfg.disturbance_on = false;
            Some(cfg)
        }
        _ => None,
    }
}

enum KeyError {
    Unknown,
    Bad(String),
}

fn parse_num(value: &str) -> Result<f64, KeyError> {
    value
        .parse::<f64>()
        .map_err(|e| KeyError::Bad(format!("{e}")))
}

fn apply_key(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<(), KeyError> {
    match key {
        "plant" => cfg.plant_name = value.to_string(),
        "dt" => cfg.dt = parse_num(value)?,
        "horizon" => cfg.horizon = parse_num(value)?,
        "x0" => {
            let mut xs = Vec::new();
            for part in value.split(',') {
                xs.push(
                    part.trim()
                        .parse::<f64>()
                        .map_err(|e| KeyError::Bad(format!("'{}': {e}", part.trim())))?,
                );
            }
            cfg.x0 = xs;
        }
        "lambda" => cfg.smlc.lambda = parse_num(value)?,
        "gamma_k" => cfg.smlc.gamma_k = parse_num(value)?,
        "gamma_alpha" => cfg.smlc.gamma_alpha = parse_num(value)?,
        "chi" => cfg.smlc.chi = parse_num(value)?,
        "epsilon" => cfg.smlc.epsilon = parse_num(value)?,
        "denom_clamp" => cfg.smlc.denom_clamp = parse_num(value)?,
        "k0" => cfg.k0 = parse_num(value)?,
        "alpha0" => cfg.alpha0 = parse_num(value)?,
        "q0" => cfg.q0 = parse_num(value)?,
        "input_range" => cfg.input_range = parse_num(value)?,
        "snr_db" => {
            cfg.snr_db = if value == "off" {
                None
            } else {
                Some(parse_num(value)?)
            };
        }
        "seed" => {
            cfg.seed = value
                .parse::<u64>()
                .map_err(|e| KeyError::Bad(format!("{e}")))?;
        }
        "disturbance" => {
            cfg.disturbance_on = match value {
                "on" => true,
                "off" => false,
                other => return Err(KeyError::Bad(format!("expected on/off, got '{other}'"))),
            };
        }
        "headway_h" => cfg.headway = parse_num(value)?,
        _ => return Err(KeyError::Unknown),
    }
    Ok(())
}

/// Fill the plant-derived fields and validate. Called after any key changes.
fn finalize(mut cfg: ScenarioConfig) -> Result<ScenarioConfig, ConfigError> {
    if cfg.plant_name.is_empty() {
        return Err(ConfigError::MissingPlant);
    }
    let plant = plant_by_name(&cfg.plant_name, cfg.headway)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    cfg.smlc.order = plant.order();
    if cfg.x0.is_empty() {
        cfg.x0 = vec![0.0; plant.state_dim()];
    }
    if cfg.x0.len() != plant.state_dim() {
        return Err(ConfigError::Invalid(format!(
            "x0 has {} entries but plant '{}' has {} states",
            cfg.x0.len(),
            cfg.plant_name,
            plant.state_dim()
        )));
    }
    cfg.validate().map_err(ConfigError::Invalid)?;
    Ok(cfg)
}

/// Parse the `key = value` config format. `#` starts a comment, blank lines
/// are ignored, unknown keys are errors, missing keys take the documented
/// defaults. `plant` is mandatory.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = base_config();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Malformed {
                line: line_no,
                text: line.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Malformed {
                line: line_no,
                text: line.to_string(),
            });
        }
        apply_key(&mut cfg, key, value).map_err(|e| match e {
            KeyError::Unknown => ConfigError::UnknownKey {
                line: line_no,
                key: key.to_string(),
            },
            KeyError::Bad(message) => ConfigError::BadValue {
                line: line_no,
                key: key.to_string(),
                message,
            },
        })?;
    }
    finalize(cfg)
}

/// Parse a config file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// Apply a single `key = value` override to an existing config (CLI flags,
/// sweep values) and re-derive the plant-dependent fields.
pub fn apply_override(
    cfg: ScenarioConfig,
    key: &str,
    value: &str,
) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = cfg;
    apply_key(&mut cfg, key, value).map_err(|e| match e {
        KeyError::Unknown => ConfigError::UnknownKey {
            line: 0,
            key: key.to_string(),
        },
        KeyError::Bad(message) => ConfigError::BadValue {
            line: 0,
            key: key.to_string(),
            message,
        },
    })?;
    finalize(cfg)
}

/// Canonical `key = value` serialization; parses back to an equal config.
pub fn config_to_lines(cfg: &ScenarioConfig) -> String {
    let x0 = cfg
        .x0
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let snr = match cfg.snr_db {
        Some(db) => db.to_string(),
        None => "off".to_string(),
    };
    format!(
        "plant = {}\n\
         dt = {}\n\
         horizon = {}\n\
         x0 = {}\n\
         lambda = {}\n\
         gamma_k = {}\n\
         gamma_alpha = {}\n\
         chi = {}\n\
         epsilon = {}\n\
         denom_clamp = {}\n\
         k0 = {}\n\
         alpha0 = {}\n\
         q0 = {}\n\
         input_range = {}\n\
         snr_db = {}\n\
         seed = {}\n\
         disturbance = {}\n\
         headway_h = {}\n",
        cfg.plant_name,
        cfg.dt,
        cfg.horizon,
        x0,
        cfg.smlc.lambda,
        cfg.smlc.gamma_k,
        cfg.smlc.gamma_alpha,
        cfg.smlc.chi,
        cfg.smlc.epsilon,
        cfg.smlc.denom_clamp,
        cfg.k0,
        cfg.alpha0,
        cfg.q0,
        cfg.input_range,
        snr,
        cfg.seed,
        if cfg.disturbance_on { "on" } else { "off" },
        cfg.headway,
    )
}
