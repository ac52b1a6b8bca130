//! The model family: variational posteriors, the Monte-Carlo ELBO,
//! training and prediction for HMOCGP and its ablations.

mod config;
mod elbo;
mod fit;
mod layout;
mod predict;

pub use config::{EarlyStopMetric, LmcShape, ModelConfig, TrainingConfig, Variant};
pub use elbo::{kl_gaussian, sample_reparam, ElboBreakdown, ElboParts, GpModel, NoiseDraws};
pub use fit::fit;
pub use layout::{FamilyLayout, FreeScalarKind, KernelSlot, ParamLayout, PhiSlot, WeightSlot};
pub use predict::{predict, predict_at, Prediction, PredictiveSamples};

use alloc::string::String;
use alloc::vec::Vec;

use crate::kernels::LmcSpec;
use crate::linalg::Mat;

/// Variational moments of one latent function: mean vector and dense
/// lower-triangular Cholesky factor (values, diagonal already positive).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LatentPosterior {
    pub output: usize,
    pub param_index: usize,
    pub mu: Vec<f64>,
    pub l_dense: Mat,
}

/// Mean-field variational posterior: one Gaussian per latent function.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VariationalPosterior {
    pub latents: Vec<LatentPosterior>,
}

/// Hyper-parameters of one latent family, in value form.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FamilyTheta {
    pub param_index: usize,
    pub lmc: LmcSpec,
}

/// All hyper-parameters of one fitted submodel.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThetaSnapshot {
    pub families: Vec<FamilyTheta>,
    /// Per-output free scalars (raw parameterization: log noise variance or
    /// raw dispersion), empty when every likelihood parameter is a GP.
    pub free_scalars: Vec<f64>,
}

/// One fitted submodel: joint over all outputs for multi-output variants,
/// or a single output otherwise.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubModel {
    /// Dataset output indices this submodel covers, in stacking order.
    pub outputs: Vec<usize>,
    pub theta: ThetaSnapshot,
    pub posterior: VariationalPosterior,
    pub training_inputs: Mat,
}

/// Training diagnostics.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Diagnostics {
    /// (step, elbo) pairs of accepted steps, per submodel.
    pub elbo_trace: Vec<Vec<(u32, f64)>>,
    pub skipped_steps: usize,
    pub jitter_events: usize,
    pub negbin_clamps: usize,
    /// Step whose parameters were kept (early stopping), per submodel.
    pub best_step: Vec<Option<u32>>,
    pub note: String,
}

/// A fitted model, immutable after training and cheap to share.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub submodels: Vec<SubModel>,
    pub diagnostics: Diagnostics,
}
