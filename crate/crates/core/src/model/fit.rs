//! Training loop: joint RMSprop ascent on (θ, φ) with optional
//! validation-based early stopping.

use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{rmsprop_step, OptimizerState, Tape};
use crate::dataset::CensoredDataset;
use crate::error::{Error, Result};
use crate::kernels::{Kernel, LmcSpec, RbfKernelParams};
use crate::linalg::Mat;
use crate::metrics;
use crate::model::config::{EarlyStopMetric, ModelConfig};
use crate::model::elbo::{GpModel, NoiseDraws, STREAM_EPS, STREAM_EVAL};
use crate::model::layout::WeightSlot;
use crate::model::predict::predict_submodel;
use crate::model::{
    Diagnostics, FamilyTheta, LatentPosterior, SubModel, ThetaSnapshot, TrainedModel,
    VariationalPosterior,
};
use crate::rng::{derive_seed, Xoshiro256};

const MAX_CONSECUTIVE_FAILURES: usize = 100;

/// Fits a model to a censored dataset.
///
/// Multi-output variants train one joint model over all outputs;
/// single-output variants train each output independently with its own
/// parameters. Deterministic given `config.training.seed`.
pub fn fit(
    dataset: &CensoredDataset,
    validation: Option<&CensoredDataset>,
    config: &ModelConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    dataset.validate()?;
    if dataset.n_points() == 0 {
        return Err(Error::Data(String::from("cannot fit an empty dataset")));
    }
    if dataset.n_outputs() != config.d_outputs {
        return Err(Error::ShapeMismatch {
            context: "dataset outputs vs config",
            expected: config.d_outputs,
            got: dataset.n_outputs(),
        });
    }
    for i in 0..dataset.n_points() {
        for d in 0..dataset.n_outputs() {
            config.likelihood.validate_observation(dataset.y[(i, d)])?;
        }
    }
    if let Some(v) = validation {
        v.validate()?;
        if v.n_outputs() != config.d_outputs {
            return Err(Error::ShapeMismatch {
                context: "validation outputs vs config",
                expected: config.d_outputs,
                got: v.n_outputs(),
            });
        }
    }

    let mut submodels = Vec::new();
    let mut diagnostics = Diagnostics::default();
    if !config.multi_output && config.d_outputs > 1 {
        let sub_config = config.single_output_view();
        for d in 0..config.d_outputs {
            let sub_data = dataset.select_output(d);
            let sub_val = validation.map(|v| v.select_output(d));
            let run_seed = derive_seed(config.training.seed, &[0x5b, d as u64]);
            let (sub, trace, best) =
                fit_single(&sub_data, sub_val.as_ref(), &sub_config, run_seed, &[d], &mut diagnostics)?;
            submodels.push(sub);
            diagnostics.elbo_trace.push(trace);
            diagnostics.best_step.push(best);
        }
    } else {
        let run_seed = derive_seed(config.training.seed, &[0x5b, u64::MAX]);
        let outputs: Vec<usize> = (0..config.d_outputs).collect();
        let (sub, trace, best) =
            fit_single(dataset, validation, config, run_seed, &outputs, &mut diagnostics)?;
        submodels.push(sub);
        diagnostics.elbo_trace.push(trace);
        diagnostics.best_step.push(best);
    }
    Ok(TrainedModel { config: config.clone(), submodels, diagnostics })
}

#[allow(clippy::type_complexity)]
fn fit_single(
    dataset: &CensoredDataset,
    validation: Option<&CensoredDataset>,
    config: &ModelConfig,
    run_seed: u64,
    outputs: &[usize],
    diagnostics: &mut Diagnostics,
) -> Result<(SubModel, Vec<(u32, f64)>, Option<u32>)> {
    let mut model = GpModel::init(config, dataset, run_seed)?;
    let n = dataset.n_points();
    let n_families = model.layout.families.len();
    let d_out = model.layout.d_outputs;

    let mut eps_streams: Vec<Vec<Xoshiro256>> = (0..n_families)
        .map(|f| {
            (0..d_out)
                .map(|d| Xoshiro256::stream(run_seed, &[STREAM_EPS, f as u64, d as u64]))
                .collect()
        })
        .collect();

    let mut opt = OptimizerState::new(config.training.learning_rate, model.n_params());
    let mut tape = Tape::new();
    let mut trace: Vec<(u32, f64)> = Vec::new();
    let mut consecutive_failures = 0usize;

    let mut best: Option<(f64, Vec<f64>, u32)> = None;
    let mut evals_since_best = 0usize;
    let metric = config.training.early_stop_metric.unwrap_or(EarlyStopMetric::Nlpd);

    for step in 0..config.training.max_steps {
        // noise is consumed every step, accepted or not, so failure
        // handling never desynchronizes the streams
        let noise = NoiseDraws::draw(&mut eps_streams, n, config.mc_samples);
        tape.reset();
        let step_result = (|| -> Result<Vec<f64>> {
            let vars = tape.params(&model.params);
            let parts = model.build_elbo(&tape, &vars, dataset, &noise)?;
            trace.push((step as u32, parts.elbo.value()));
            diagnostics.negbin_clamps += parts.negbin_clamps;
            let mut grads = tape.gradients(parts.elbo)?;
            // ascent on the ELBO as descent on its negation
            for g in grads.iter_mut() {
                *g = -*g;
            }
            Ok(grads)
        })();
        diagnostics.jitter_events += tape.jitter_events();

        let step_ok = match step_result {
            Ok(mut grads) => {
                if config.training.freeze_theta {
                    for g in grads.iter_mut().take(model.layout.theta_end) {
                        *g = 0.0;
                    }
                }
                match rmsprop_step(&mut model.params, &grads, &mut opt) {
                    Ok(()) => true,
                    Err(Error::NonFiniteGradient { .. }) => false,
                    Err(e) => return Err(e),
                }
            }
            Err(
                Error::NonFiniteElbo { .. }
                | Error::NonFiniteGradient { .. }
                | Error::NumericalDegeneracy { .. },
            ) => false,
            Err(e) => return Err(e),
        };
        if step_ok {
            consecutive_failures = 0;
        } else {
            consecutive_failures += 1;
            diagnostics.skipped_steps += 1;
            if consecutive_failures > MAX_CONSECUTIVE_FAILURES {
                return Err(Error::TrainingDivergence { consecutive: consecutive_failures });
            }
        }

        if let Some(val) = validation {
            if (step + 1) % config.training.eval_interval == 0 {
                let score = validation_score(&model, val, metric, run_seed, step as u64)?;
                match &best {
                    Some((best_score, _, _)) if score >= *best_score => {
                        evals_since_best += 1;
                        if evals_since_best >= config.training.patience {
                            break;
                        }
                    }
                    _ => {
                        best = Some((score, model.params.clone(), step as u32));
                        evals_since_best = 0;
                    }
                }
            }
        }
    }

    let best_step = if let Some((_, params, step)) = best {
        model.params = params;
        Some(step)
    } else {
        None
    };

    Ok((snapshot(&model, outputs), trace, best_step))
}

/// Validation NLPD (or MAE) of the current parameters.
fn validation_score(
    model: &GpModel,
    validation: &CensoredDataset,
    metric: EarlyStopMetric,
    run_seed: u64,
    step: u64,
) -> Result<f64> {
    let sub = snapshot(model, &(0..model.layout.d_outputs).collect::<Vec<_>>());
    let eval_seed = derive_seed(run_seed, &[STREAM_EVAL, step]);
    let pred = predict_submodel(
        &sub,
        &model.config,
        &validation.x,
        model.config.training.eval_samples,
        eval_seed,
    )?;
    let mut total = 0.0;
    for (col, &_output) in sub.outputs.iter().enumerate() {
        let y: Vec<f64> =
            (0..validation.n_points()).map(|i| validation.y[(i, col)]).collect();
        match metric {
            EarlyStopMetric::Nlpd => {
                let out = metrics::nlpd(&pred.samples[col], &y, &model.config.likelihood)?;
                total += out.value;
            }
            EarlyStopMetric::Mae => {
                let est = pred.point_estimates(col, metrics::PointEstimate::Mean);
                total += metrics::mae(&est, &y)?;
            }
        }
    }
    Ok(total)
}

/// Freezes the working parameters into the serializable value form.
fn snapshot(model: &GpModel, outputs: &[usize]) -> SubModel {
    let layout = &model.layout;
    let params = &model.params;
    let n = layout.n_points;
    let mut families = Vec::with_capacity(layout.families.len());
    let mut latents = Vec::new();
    for (fam_idx, fam) in layout.families.iter().enumerate() {
        let kernels: Vec<Kernel> = fam
            .kernels
            .iter()
            .map(|slot| {
                Kernel::Rbf(RbfKernelParams {
                    log_variance: params[slot.log_variance],
                    log_lengthscale: params[slot.log_lengthscale],
                })
            })
            .collect();
        let weights: Vec<Mat> = fam
            .weights
            .iter()
            .map(|w| match w {
                WeightSlot::FixedOne => Mat::from_rows(&[&[1.0]]),
                WeightSlot::Trainable { start, rows, cols } => Mat::from_vec(
                    *rows,
                    *cols,
                    params[*start..*start + rows * cols].to_vec(),
                ),
            })
            .collect();
        families.push(FamilyTheta {
            param_index: fam.param_index,
            lmc: LmcSpec { kernels, weights },
        });
        for (d, slot) in fam.phi.iter().enumerate() {
            let packed = layout.packed_chol_values(params, fam_idx, d);
            let mut l_dense = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    l_dense[(i, j)] = packed[i * (i + 1) / 2 + j];
                }
            }
            latents.push(LatentPosterior {
                output: d,
                param_index: fam.param_index,
                mu: params[slot.mu.clone()].to_vec(),
                l_dense,
            });
        }
    }
    let free_scalars = layout
        .free_scalars
        .as_ref()
        .map(|(_, r)| params[r.clone()].to_vec())
        .unwrap_or_default();
    SubModel {
        outputs: outputs.to_vec(),
        theta: ThetaSnapshot { families, free_scalars },
        posterior: VariationalPosterior { latents },
        training_inputs: model.x.clone(),
    }
}
