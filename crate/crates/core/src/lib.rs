//! Heteroscedastic multi-output censored Gaussian process regression.
//!
//! The crate implements the HMOCGP model family and its ablations
//! (NCGP, MONCGP, CGP, HCGP, MOCGP, HMOCGP): Gaussian-process priors over
//! the parameters of censored observation models, coupled across outputs
//! through a linear model of coregionalization and trained by stochastic
//! variational inference with a reverse-mode gradient tape.
//!
//! The core is `no_std`-compatible (requires `alloc`); everything here is
//! pure computation over in-memory data. File formats, CSV/JSON ingestion
//! and the command-line front end live in the companion `hmocgp-cli` crate.
//!
//! Module map:
//! * [`kernels`] / [`linalg`] — stationary kernels, LMC cross-covariance
//!   assembly and the dense linear-algebra kernel (Cholesky with jitter
//!   escalation, triangular solves, Gaussian conditionals).
//! * [`likelihood`] — censored and non-censored observation models
//!   (Gaussian, Tobit, Poisson, negative binomial) with numerically
//!   stable tail terms, generic over plain floats and tape variables.
//! * [`autodiff`] — the reverse-mode tape, RMSprop and a finite-difference
//!   gradient checker.
//! * [`model`] — variational posteriors, the Monte-Carlo ELBO, training
//!   and the predictive distribution.
//! * [`metrics`] — NLPD / MAE / R² and the k-fold evaluation harness.
//! * [`sim`] — synthetic data generation from MOGP priors and the three
//!   censoring protocols (interval, intensity, supply proxy).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod kernels;
pub mod likelihood;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sim;

pub use dataset::CensoredDataset;
pub use error::Error;
pub use kernels::{Kernel, LmcSpec, RbfKernelParams};
pub use likelihood::{Family, LikelihoodSpec, Link, SurvivalMode};
pub use linalg::{CholFactor, CovMatrix, Mat};
pub use model::{ModelConfig, TrainedModel, Variant};
pub use rng::Xoshiro256;
