//! Predictive distribution: latent conditionals integrated against the
//! variational posterior, then Monte-Carlo samples through the links.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::CensoredDataset;
use crate::error::{Error, Result};
use crate::kernels::{lmc_covariance, lmc_cross_covariance};
use crate::likelihood::{base_mean, base_variance, link_apply, Family};
use crate::linalg::{cholesky_with_jitter, default_base_jitter, gaussian_conditional, Mat};
use crate::math;
use crate::model::config::ModelConfig;
use crate::model::elbo::STREAM_PREDICT;
use crate::model::layout::FreeScalarKind;
use crate::model::{SubModel, TrainedModel};
use crate::rng::{derive_seed, Xoshiro256};

/// Retained linked-parameter samples for one output: `get(point, sample)`
/// is the J-vector of distribution parameters.
#[derive(Debug, Clone)]
pub struct PredictiveSamples {
    pub n_points: usize,
    pub n_samples: usize,
    pub n_params: usize,
    data: Vec<f64>,
}

impl PredictiveSamples {
    fn zeros(n_points: usize, n_samples: usize, n_params: usize) -> Self {
        Self { n_points, n_samples, n_params, data: vec![0.0; n_points * n_samples * n_params] }
    }

    /// Single-sample container, mostly for tests and direct metric calls.
    pub fn from_rows(n_points: usize, n_samples: usize, rows: Vec<f64>, n_params: usize) -> Self {
        assert_eq!(rows.len(), n_points * n_samples * n_params);
        Self { n_points, n_samples, n_params, data: rows }
    }

    #[inline]
    pub fn get(&self, point: usize, sample: usize) -> &[f64] {
        let base = (point * self.n_samples + sample) * self.n_params;
        &self.data[base..base + self.n_params]
    }

    #[inline]
    fn set(&mut self, point: usize, sample: usize, values: &[f64]) {
        let base = (point * self.n_samples + sample) * self.n_params;
        self.data[base..base + self.n_params].copy_from_slice(values);
    }
}

fn estimate_points(
    samples: &PredictiveSamples,
    family: Family,
    kind: crate::metrics::PointEstimate,
) -> Vec<f64> {
    (0..samples.n_points)
        .map(|i| {
            let mut means: Vec<f64> = (0..samples.n_samples)
                .map(|s| base_mean(samples.get(i, s), family))
                .collect();
            match kind {
                crate::metrics::PointEstimate::Mean => {
                    means.iter().sum::<f64>() / means.len() as f64
                }
                crate::metrics::PointEstimate::Median => math::median(&mut means),
            }
        })
        .collect()
}

/// Prediction for one submodel, outputs indexed locally.
#[derive(Debug, Clone)]
pub(crate) struct SubPrediction {
    pub samples: Vec<PredictiveSamples>,
    /// [output][param j][point]: conditional latent moments.
    pub latent_mean: Vec<Vec<Vec<f64>>>,
    pub latent_var: Vec<Vec<Vec<f64>>>,
    pub pred_mean: Vec<Vec<f64>>,
    pub pred_var: Vec<Vec<f64>>,
    pub family: Family,
}

impl SubPrediction {
    pub fn point_estimates(&self, output: usize, kind: crate::metrics::PointEstimate) -> Vec<f64> {
        estimate_points(&self.samples[output], self.family, kind)
    }
}

/// Full prediction across all outputs of the original model.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub n_points: usize,
    pub d_outputs: usize,
    /// Per output: retained linked-parameter samples (for NLPD).
    pub samples: Vec<PredictiveSamples>,
    /// [output][latent param j][point]: conditional latent moments.
    pub latent_mean: Vec<Vec<Vec<f64>>>,
    pub latent_var: Vec<Vec<Vec<f64>>>,
    /// N*×D moments of the base (non-censored) predictive distribution.
    pub pred_mean: Mat,
    pub pred_var: Mat,
    pub family: Family,
}

impl Prediction {
    /// Point predictions per output: sample average of the base-distribution
    /// means, or their median.
    pub fn point_estimates(&self, output: usize, kind: crate::metrics::PointEstimate) -> Vec<f64> {
        estimate_points(&self.samples[output], self.family, kind)
    }
}

/// Predicts at `x_star` with `n_samples` Monte-Carlo draws per point.
pub fn predict(
    model: &TrainedModel,
    x_star: &Mat,
    n_samples: usize,
    seed: u64,
) -> Result<Prediction> {
    if n_samples == 0 {
        return Err(Error::Config(alloc::string::String::from(
            "prediction needs at least one sample",
        )));
    }
    let d = model.config.d_outputs;
    let j_count = model.config.likelihood.family.param_count();
    let n_star = x_star.n_rows();
    let mut samples: Vec<Option<PredictiveSamples>> = vec![None; d];
    let mut latent_mean = vec![vec![vec![0.0; n_star]; j_count]; d];
    let mut latent_var = vec![vec![vec![0.0; n_star]; j_count]; d];
    let mut pred_mean = Mat::zeros(n_star, d);
    let mut pred_var = Mat::zeros(n_star, d);

    for (sub_idx, sub) in model.submodels.iter().enumerate() {
        let sub_seed = derive_seed(seed, &[STREAM_PREDICT, sub_idx as u64]);
        let sp = predict_submodel(sub, &model.config, x_star, n_samples, sub_seed)?;
        for (local, &global) in sub.outputs.iter().enumerate() {
            samples[global] = Some(sp.samples[local].clone());
            for j in 0..j_count {
                latent_mean[global][j] = sp.latent_mean[local][j].clone();
                latent_var[global][j] = sp.latent_var[local][j].clone();
            }
            for i in 0..n_star {
                pred_mean[(i, global)] = sp.pred_mean[local][i];
                pred_var[(i, global)] = sp.pred_var[local][i];
            }
        }
    }
    Ok(Prediction {
        n_points: n_star,
        d_outputs: d,
        samples: samples.into_iter().map(|s| s.expect("all outputs covered")).collect(),
        latent_mean,
        latent_var,
        pred_mean,
        pred_var,
        family: model.config.likelihood.family,
    })
}

/// Predictions at a dataset's inputs.
pub fn predict_at(
    model: &TrainedModel,
    dataset: &CensoredDataset,
    n_samples: usize,
    seed: u64,
) -> Result<Prediction> {
    predict(model, &dataset.x, n_samples, seed)
}

pub(crate) fn predict_submodel(
    sub: &SubModel,
    config: &ModelConfig,
    x_star: &Mat,
    n_samples: usize,
    seed: u64,
) -> Result<SubPrediction> {
    let d_sub = sub.outputs.len();
    let n_star = x_star.n_rows();
    let n_train = sub.training_inputs.n_rows();
    let m_star = n_star * d_sub;
    let j_count = config.likelihood.family.param_count();
    let family = config.likelihood.family;

    let n_families = sub.theta.families.len();
    let mut draws: Vec<Vec<f64>> = Vec::with_capacity(n_families);
    let mut fam_param_index = Vec::with_capacity(n_families);
    let mut latent_mean = vec![vec![vec![0.0; n_star]; j_count]; d_sub];
    let mut latent_var = vec![vec![vec![0.0; n_star]; j_count]; d_sub];

    for (fam_idx, fam) in sub.theta.families.iter().enumerate() {
        let lmc = &fam.lmc;
        let k_nn = lmc_covariance(&sub.training_inputs, lmc, d_sub)?;
        let k_sn = lmc_cross_covariance(x_star, &sub.training_inputs, lmc, d_sub)?;
        let k_ss = lmc_covariance(x_star, lmc, d_sub)?;

        // stacked posterior moments, output-major
        let mut q_mean = Vec::with_capacity(n_train * d_sub);
        let mut q_cov = Mat::zeros(n_train * d_sub, n_train * d_sub);
        for local in 0..d_sub {
            let latent = sub
                .posterior
                .latents
                .iter()
                .find(|l| l.output == local && l.param_index == fam.param_index)
                .ok_or_else(|| {
                    Error::Config(alloc::format!(
                        "posterior missing latent for output {local}, parameter {}",
                        fam.param_index
                    ))
                })?;
            q_mean.extend_from_slice(&latent.mu);
            let l = &latent.l_dense;
            for i in 0..n_train {
                for j in 0..n_train {
                    let mut acc = 0.0;
                    for k in 0..=i.min(j) {
                        acc += l[(i, k)] * l[(j, k)];
                    }
                    q_cov[(local * n_train + i, local * n_train + j)] = acc;
                }
            }
        }

        let (mean, cov) = gaussian_conditional(&k_nn, &k_sn, &k_ss, &q_mean, &q_cov)?;
        for local in 0..d_sub {
            let j = fam.param_index;
            for i in 0..n_star {
                latent_mean[local][j][i] = mean[local * n_star + i];
                latent_var[local][j][i] = cov[(local * n_star + i, local * n_star + i)];
            }
        }

        // joint draws from the conditional
        let factor =
            cholesky_with_jitter(&cov, default_base_jitter(&cov), "predictive covariance")?;
        let mut rng = Xoshiro256::stream(seed, &[fam_idx as u64]);
        let mut fam_draws = vec![0.0; n_samples * m_star];
        let mut zeta = vec![0.0; m_star];
        for s in 0..n_samples {
            rng.fill_standard_normal(&mut zeta);
            for i in 0..m_star {
                let mut acc = mean[i];
                for k in 0..=i {
                    acc += factor.l[(i, k)] * zeta[k];
                }
                fam_draws[s * m_star + i] = acc;
            }
        }
        draws.push(fam_draws);
        fam_param_index.push(fam.param_index);
    }

    // free (non-GP) parameters per output
    let free_kind = free_scalar_kind(config);
    let free_values: Vec<f64> = sub
        .theta
        .free_scalars
        .iter()
        .map(|&raw| match free_kind {
            Some(FreeScalarKind::LogNoiseVariance) => math::exp(raw),
            Some(FreeScalarKind::RawDispersion) => math::softplus(raw),
            None => raw,
        })
        .collect();

    // map draws through the links, collect samples and moments
    let mut samples: Vec<PredictiveSamples> =
        (0..d_sub).map(|_| PredictiveSamples::zeros(n_star, n_samples, j_count)).collect();
    let mut pred_mean = vec![vec![0.0; n_star]; d_sub];
    let mut pred_var = vec![vec![0.0; n_star]; d_sub];
    let links = &config.likelihood.links;
    let mut linked = vec![0.0; j_count];
    let mut gp_filled = vec![false; j_count];
    for &j in &fam_param_index {
        gp_filled[j] = true;
    }
    for local in 0..d_sub {
        for i in 0..n_star {
            let mut mean_acc = 0.0;
            let mut mean_sq_acc = 0.0;
            let mut var_acc = 0.0;
            for s in 0..n_samples {
                for (fam_pos, &j) in fam_param_index.iter().enumerate() {
                    let raw = draws[fam_pos][s * m_star + local * n_star + i];
                    linked[j] = link_apply(links[j], raw);
                }
                for slot_j in 0..j_count {
                    if !gp_filled[slot_j] {
                        // the Gaussian noise scalar is shared across outputs
                        linked[slot_j] = if free_values.len() == 1 {
                            free_values[0]
                        } else {
                            free_values[local]
                        };
                    }
                }
                samples[local].set(i, s, &linked);
                let bm = base_mean(&linked, family);
                mean_acc += bm;
                mean_sq_acc += bm * bm;
                var_acc += base_variance(&linked, family);
            }
            let sn = n_samples as f64;
            let m1 = mean_acc / sn;
            pred_mean[local][i] = m1;
            // law of total variance across parameter samples
            pred_var[local][i] = var_acc / sn + (mean_sq_acc / sn - m1 * m1).max(0.0);
        }
    }

    Ok(SubPrediction { samples, latent_mean, latent_var, pred_mean, pred_var, family })
}

fn free_scalar_kind(config: &ModelConfig) -> Option<FreeScalarKind> {
    match (config.likelihood.family, config.heteroscedastic) {
        (Family::Gaussian, false) => Some(FreeScalarKind::LogNoiseVariance),
        (Family::NegativeBinomial, false) => Some(FreeScalarKind::RawDispersion),
        _ => None,
    }
}
