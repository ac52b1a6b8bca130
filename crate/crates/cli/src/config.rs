//! Run-configuration files. All configs are JSON with a `schema_version`
//! field; unknown keys are rejected to protect experiment provenance.

use serde::{Deserialize, Serialize};

use hmocgp_core::metrics::{FoldScheme, PointEstimate};
use hmocgp_core::model::{LmcShape, ModelConfig, Variant};
use hmocgp_core::sim::SyntheticSpec;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn check_version(path: &str, version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(CliError::Config {
            path: path.into(),
            message: format!("unsupported schema_version {version}, expected {SCHEMA_VERSION}"),
        });
    }
    Ok(())
}

/// Censoring protocol applied after the prior draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    /// Interval censoring from the spec's regions / overlap scenario.
    Interval,
    /// Scale flagged observations to (1−c)·ỹ; flags drawn per point with
    /// the given probability.
    Intensity { intensity: f64, flag_probability: f64 },
    /// Supply-proxy censoring: dropoffs are derived from the true series as
    /// `pickups + offset + noise_sd·ε`, clamped at zero.
    SupplyProxy {
        offset: f64,
        noise_sd: f64,
        integer_outputs: bool,
        /// Outputs to censor; empty means every output.
        #[serde(default)]
        outputs: Vec<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub schema_version: u32,
    pub spec: SyntheticSpec,
    pub protocol: Protocol,
}

impl SimulateConfig {
    pub fn load(path: &str) -> Result<Self> {
        let cfg: SimulateConfig = read_json(path)?;
        check_version(path, cfg.schema_version)?;
        cfg.spec.validate().map_err(|e| CliError::Config {
            path: path.into(),
            message: e.to_string(),
        })?;
        if let Protocol::Intensity { intensity, flag_probability } = &cfg.protocol {
            if !(0.0..1.0).contains(intensity) {
                return Err(CliError::Config {
                    path: path.into(),
                    message: format!("intensity must lie in [0, 1), got {intensity}"),
                });
            }
            if !(0.0..=1.0).contains(flag_probability) {
                return Err(CliError::Config {
                    path: path.into(),
                    message: format!("flag_probability must lie in [0, 1], got {flag_probability}"),
                });
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
}

impl FitConfig {
    pub fn load(path: &str) -> Result<Self> {
        let cfg: FitConfig = read_json(path)?;
        check_version(path, cfg.schema_version)?;
        cfg.model.validate().map_err(|e| CliError::Config {
            path: path.into(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub schema_version: u32,
    /// Template configuration; variants override the ablation switches.
    pub base_model: ModelConfig,
    pub variants: Vec<Variant>,
    pub k: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_point_estimate")]
    pub point_estimate: PointEstimate,
    #[serde(default = "default_fold_scheme")]
    pub fold_scheme: FoldScheme,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    /// Additionally fit each variant on the full dataset and emit per-input
    /// plot data (predictive mean, 2σ band, censoring markers).
    #[serde(default)]
    pub plot_data: bool,
}

fn default_point_estimate() -> PointEstimate {
    PointEstimate::Mean
}

fn default_fold_scheme() -> FoldScheme {
    FoldScheme::Contiguous
}

fn default_eval_samples() -> usize {
    200
}

impl EvaluateConfig {
    pub fn load(path: &str) -> Result<Self> {
        let cfg: EvaluateConfig = read_json(path)?;
        check_version(path, cfg.schema_version)?;
        if cfg.variants.is_empty() {
            return Err(CliError::Config { path: path.into(), message: "no variants listed".into() });
        }
        if cfg.seeds.is_empty() {
            return Err(CliError::Config { path: path.into(), message: "no seeds listed".into() });
        }
        cfg.base_model.validate().map_err(|e| CliError::Config {
            path: path.into(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }
}

/// Derives a variant's configuration from the template.
pub fn apply_variant(base: &ModelConfig, variant: Variant) -> ModelConfig {
    let (multi_output, heteroscedastic, censored) = variant.switches();
    let mut cfg = base.clone();
    cfg.multi_output = multi_output;
    cfg.heteroscedastic = heteroscedastic;
    cfg.censored = censored;
    cfg.likelihood.censored = censored;
    let multi_rank = base.lmc_f.ranks.first().copied().unwrap_or(1).max(1);
    let rank = if multi_output { multi_rank } else { 1 };
    cfg.lmc_f = LmcShape::icm(rank);
    cfg.lmc_g = if heteroscedastic {
        Some(
            base.lmc_g
                .clone()
                .map(|g| if multi_output { g } else { LmcShape::icm(1) })
                .unwrap_or(LmcShape::icm(rank)),
        )
    } else {
        None
    };
    cfg
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.into(),
        message: e.to_string(),
    })
}
