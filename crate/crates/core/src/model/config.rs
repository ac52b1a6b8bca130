//! Model configuration and the ablation-variant switchboard.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::likelihood::{Family, LikelihoodSpec};

/// Coregionalization shape: one rank per latent kernel (Q = ranks.len()).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LmcShape {
    pub ranks: Vec<usize>,
}

impl LmcShape {
    /// Intrinsic coregionalization model with the given rank.
    pub fn icm(rank: usize) -> Self {
        Self { ranks: alloc::vec![rank] }
    }

    pub fn n_latents(&self) -> usize {
        self.ranks.len()
    }
}

impl Default for LmcShape {
    fn default() -> Self {
        Self::icm(1)
    }
}

/// The named ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ncgp,
    Moncgp,
    Cgp,
    Hcgp,
    Mocgp,
    Hmocgp,
}

impl Variant {
    pub const ALL: [Variant; 6] =
        [Variant::Ncgp, Variant::Moncgp, Variant::Cgp, Variant::Hcgp, Variant::Mocgp, Variant::Hmocgp];

    /// (multi_output, heteroscedastic, censored)
    pub fn switches(self) -> (bool, bool, bool) {
        match self {
            Variant::Ncgp => (false, false, false),
            Variant::Moncgp => (true, false, false),
            Variant::Cgp => (false, false, true),
            Variant::Hcgp => (false, true, true),
            Variant::Mocgp => (true, false, true),
            Variant::Hmocgp => (true, true, true),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ncgp => "ncgp",
            Variant::Moncgp => "moncgp",
            Variant::Cgp => "cgp",
            Variant::Hcgp => "hcgp",
            Variant::Mocgp => "mocgp",
            Variant::Hmocgp => "hmocgp",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown variant '{name}'")))
    }
}

/// Metric used for early stopping on the validation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyStopMetric {
    Nlpd,
    Mae,
}

/// Optimization schedule.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    /// Validation evaluations happen every this many steps.
    pub eval_interval: usize,
    /// Evaluations without improvement before training stops.
    pub patience: usize,
    pub seed: u64,
    /// Predictive samples drawn per validation evaluation.
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    #[serde(default)]
    pub early_stop_metric: Option<EarlyStopMetric>,
    /// Hold hyper-parameters θ fixed and train only the posterior φ.
    #[serde(default)]
    pub freeze_theta: bool,
}

fn default_eval_samples() -> usize {
    64
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            max_steps: 2000,
            eval_interval: 25,
            patience: 20,
            seed: 0,
            eval_samples: default_eval_samples(),
            early_stop_metric: None,
            freeze_theta: false,
        }
    }
}

/// Everything needed to build and train one model.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub multi_output: bool,
    pub heteroscedastic: bool,
    pub censored: bool,
    pub likelihood: LikelihoodSpec,
    pub lmc_f: LmcShape,
    #[serde(default)]
    pub lmc_g: Option<LmcShape>,
    pub d_outputs: usize,
    pub mc_samples: usize,
    pub training: TrainingConfig,
}

impl ModelConfig {
    /// Config for one of the six named variants.
    pub fn for_variant(
        variant: Variant,
        family: Family,
        d_outputs: usize,
        multi_rank: usize,
        training: TrainingConfig,
    ) -> Self {
        let (multi_output, heteroscedastic, censored) = variant.switches();
        let mut likelihood = match family {
            Family::Gaussian => LikelihoodSpec::gaussian(censored),
            Family::Poisson => LikelihoodSpec::poisson(censored),
            Family::NegativeBinomial => LikelihoodSpec::negative_binomial(censored),
        };
        likelihood.censored = censored;
        let rank = if multi_output { multi_rank } else { 1 };
        Self {
            multi_output,
            heteroscedastic,
            censored,
            likelihood,
            lmc_f: LmcShape::icm(rank),
            lmc_g: if heteroscedastic { Some(LmcShape::icm(rank)) } else { None },
            d_outputs,
            mc_samples: 3,
            training,
        }
    }

    pub fn variant_name(&self) -> String {
        for v in Variant::ALL {
            if v.switches() == (self.multi_output, self.heteroscedastic, self.censored) {
                return String::from(v.name());
            }
        }
        String::from("custom")
    }

    pub fn validate(&self) -> Result<()> {
        self.likelihood.validate()?;
        if self.d_outputs == 0 {
            return Err(Error::Config(String::from("d_outputs must be at least 1")));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config(String::from("mc_samples must be at least 1")));
        }
        if self.likelihood.censored != self.censored {
            return Err(Error::Config(String::from(
                "likelihood.censored must match the model's censored switch",
            )));
        }
        if self.heteroscedastic {
            if self.likelihood.family.param_count() < 2 {
                return Err(Error::Config(format!(
                    "{:?} has a single parameter; heteroscedastic variants need a second latent",
                    self.likelihood.family
                )));
            }
            if self.lmc_g.is_none() {
                return Err(Error::Config(String::from(
                    "heteroscedastic models need lmc_g",
                )));
            }
        }
        if self.lmc_f.n_latents() == 0 || self.lmc_f.ranks.iter().any(|&r| r == 0) {
            return Err(Error::Config(String::from("lmc_f must have positive ranks")));
        }
        if let Some(g) = &self.lmc_g {
            if g.n_latents() == 0 || g.ranks.iter().any(|&r| r == 0) {
                return Err(Error::Config(String::from("lmc_g must have positive ranks")));
            }
        }
        if !(self.training.learning_rate >= 0.0) || !self.training.learning_rate.is_finite() {
            return Err(Error::Config(String::from("learning rate must be finite")));
        }
        if self.training.eval_interval == 0 {
            return Err(Error::Config(String::from("eval_interval must be positive")));
        }
        Ok(())
    }

    /// Copy of this config restricted to a single output, used when fitting
    /// the non-multi-output variants one output at a time.
    pub(crate) fn single_output_view(&self) -> ModelConfig {
        let mut c = self.clone();
        c.d_outputs = 1;
        c
    }
}
