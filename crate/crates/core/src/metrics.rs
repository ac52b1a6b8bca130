//! Performance metrics and the k-fold evaluation harness.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::dataset::CensoredDataset;
use crate::error::{Error, Result};
use crate::likelihood::{log_censored_generic, LikelihoodSpec};

use crate::math;
use crate::model::{fit, predict_at, ModelConfig, PredictiveSamples};
use crate::rng::derive_seed;

/// Point-prediction convention for MAE / R².
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointEstimate {
    Mean,
    Median,
}

/// Fold construction scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    /// Contiguous blocks in the input ordering (time-series-safe).
    Contiguous,
    /// Seed-shuffled assignment.
    Shuffled,
}

/// NLPD evaluation outcome: the value plus any points where every sample
/// assigned zero density (the value is +inf in that case).
#[derive(Debug, Clone, PartialEq)]
pub struct NlpdOutcome {
    pub value: f64,
    pub degenerate_points: Vec<usize>,
}

/// Negative log predictive density under the base (non-censored)
/// distribution, Monte-Carlo averaged in probability space:
/// −Σ_i log[(1/S) Σ_s P(y_i | params_{i,s})].
pub fn nlpd(samples: &PredictiveSamples, y_true: &[f64], spec: &LikelihoodSpec) -> Result<NlpdOutcome> {
    if samples.n_points != y_true.len() {
        return Err(Error::ShapeMismatch {
            context: "nlpd targets",
            expected: samples.n_points,
            got: y_true.len(),
        });
    }
    if samples.n_samples == 0 {
        return Err(Error::Config(String::from("nlpd needs at least one sample")));
    }
    let mut total = 0.0;
    let mut degenerate = Vec::new();
    let mut lps = alloc::vec![0.0; samples.n_samples];
    for i in 0..samples.n_points {
        for s in 0..samples.n_samples {
            lps[s] = log_censored_generic(y_true[i], samples.get(i, s), spec, false)?;
        }
        let lme = math::logsumexp(&lps) - math::ln(samples.n_samples as f64);
        if lme == f64::NEG_INFINITY {
            degenerate.push(i);
            total = f64::INFINITY;
        } else if total.is_finite() {
            total -= lme;
        }
    }
    Ok(NlpdOutcome { value: total, degenerate_points: degenerate })
}

/// Mean absolute error.
pub fn mae(y_pred: &[f64], y_true: &[f64]) -> Result<f64> {
    if y_pred.len() != y_true.len() {
        return Err(Error::ShapeMismatch {
            context: "mae inputs",
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_pred.is_empty() {
        return Err(Error::UndefinedMetric(String::from("mae of an empty vector")));
    }
    Ok(y_pred.iter().zip(y_true).map(|(p, t)| (p - t).abs()).sum::<f64>() / y_pred.len() as f64)
}

/// Coefficient of determination 1 − SSE/SST.
pub fn r_squared(y_pred: &[f64], y_true: &[f64]) -> Result<f64> {
    if y_pred.len() != y_true.len() {
        return Err(Error::ShapeMismatch {
            context: "r² inputs",
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(Error::UndefinedMetric(String::from("r² needs at least two points")));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let sst: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    if sst == 0.0 {
        return Err(Error::UndefinedMetric(String::from("r² undefined for constant targets")));
    }
    let sse: f64 = y_pred.iter().zip(y_true).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(1.0 - sse / sst)
}

/// Pearson correlation, the pairing convenience for picking correlated
/// series.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::ShapeMismatch { context: "pearson inputs", expected: a.len(), got: b.len() });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedMetric(String::from("pearson undefined for constant series")));
    }
    Ok(cov / (va * vb).sqrt())
}

/// Contiguous-block fold boundaries: sizes differ by at most one, earlier
/// folds take the remainder.
pub fn fold_partition(n: usize, k: usize) -> Result<Vec<core::ops::Range<usize>>> {
    if k < 2 {
        return Err(Error::Config(String::from("k-fold needs k ≥ 2")));
    }
    if n < k {
        return Err(Error::Config(format!("cannot split {n} points into {k} folds")));
    }
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(start..start + len);
        start += len;
    }
    Ok(out)
}

/// Shuffled fold membership (deterministic in the seed): returns per-fold
/// index lists.
pub fn shuffled_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let ranges = fold_partition(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = crate::rng::Xoshiro256::stream(seed, &[0x66]);
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    let mut out = Vec::with_capacity(k);
    for r in ranges {
        let mut fold: Vec<usize> = order[r].to_vec();
        fold.sort_unstable();
        out.push(fold);
    }
    Ok(out)
}

/// One metric row of an evaluation: a (model, output, fold, seed) cell.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricRow {
    pub model: String,
    /// None pools every output.
    pub output: Option<usize>,
    pub fold: usize,
    pub seed: u64,
    pub nlpd: f64,
    pub mae: f64,
    pub r2: Option<f64>,
    pub degenerate_points: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AggregateRow {
    pub model: String,
    pub output: Option<usize>,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Full evaluation report: per-cell rows plus recomputable aggregates.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub seeds: Vec<u64>,
    pub point_estimate: PointEstimate,
    pub fold_scheme: FoldScheme,
    /// FNV-1a digests of the model configurations, for provenance.
    pub config_digests: Vec<(String, u64)>,
    pub rows: Vec<MetricRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl EvalReport {
    /// Mean/std over (fold, seed) per (model, output, metric).
    pub fn aggregate(rows: &[MetricRow]) -> Vec<AggregateRow> {
        let mut keys: Vec<(String, Option<usize>)> = Vec::new();
        for r in rows {
            let key = (r.model.clone(), r.output);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let mut out = Vec::new();
        for (model, output) in keys {
            for metric in ["nlpd", "mae", "r2"] {
                let values: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.model == model && r.output == output)
                    .filter_map(|r| match metric {
                        "nlpd" => Some(r.nlpd),
                        "mae" => Some(r.mae),
                        _ => r.r2,
                    })
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                out.push(AggregateRow {
                    model: model.clone(),
                    output,
                    metric: String::from(metric),
                    mean,
                    std: math::sqrt(var),
                    count: values.len(),
                });
            }
        }
        out
    }
}

/// FNV-1a over a canonical byte rendering, for config provenance digests.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Everything defining one fit-and-score task of the k-fold harness.
#[derive(Debug, Clone)]
pub struct EvalTask {
    pub model_name: String,
    pub config_index: usize,
    pub fold: usize,
    pub seed: u64,
    pub n_eval_samples: usize,
    pub point_estimate: PointEstimate,
}

/// Runs one task: fit on everything outside the fold, score on the fold.
///
/// Evaluation targets are the true outputs where known, the observed ones
/// otherwise. Returns per-output rows plus a pooled row (output = None).
pub fn run_eval_task(
    dataset: &CensoredDataset,
    fold_indices: &[usize],
    config: &ModelConfig,
    task: &EvalTask,
) -> Result<Vec<MetricRow>> {
    let train_indices: Vec<usize> =
        (0..dataset.n_points()).filter(|i| !fold_indices.contains(i)).collect();
    let train = dataset.subset(&train_indices);
    let test = dataset.subset(fold_indices);

    let mut cfg = config.clone();
    cfg.training.seed = derive_seed(task.seed, &[0x7a, task.config_index as u64, task.fold as u64]);
    let model = fit(&train, None, &cfg)?;
    let pred = predict_at(&model, &test, task.n_eval_samples, derive_seed(cfg.training.seed, &[0x70]))?;

    let targets = test.eval_targets();
    let d = test.n_outputs();
    let mut rows = Vec::with_capacity(d + 1);
    let mut pooled_pred: Vec<f64> = Vec::new();
    let mut pooled_true: Vec<f64> = Vec::new();
    let mut pooled_nlpd = 0.0;
    let mut pooled_degenerate = 0usize;
    for output in 0..d {
        let y: Vec<f64> = (0..test.n_points()).map(|i| targets[(i, output)]).collect();
        let out = nlpd(&pred.samples[output], &y, &cfg.likelihood)?;
        let est = pred.point_estimates(output, task.point_estimate);
        let mae_v = mae(&est, &y)?;
        let r2_v = r_squared(&est, &y).ok();
        pooled_nlpd += out.value;
        pooled_degenerate += out.degenerate_points.len();
        pooled_pred.extend_from_slice(&est);
        pooled_true.extend_from_slice(&y);
        rows.push(MetricRow {
            model: task.model_name.clone(),
            output: Some(output),
            fold: task.fold,
            seed: task.seed,
            nlpd: out.value,
            mae: mae_v,
            r2: r2_v,
            degenerate_points: out.degenerate_points.len(),
        });
    }
    rows.push(MetricRow {
        model: task.model_name.clone(),
        output: None,
        fold: task.fold,
        seed: task.seed,
        nlpd: pooled_nlpd,
        mae: mae(&pooled_pred, &pooled_true)?,
        r2: r_squared(&pooled_pred, &pooled_true).ok(),
        degenerate_points: pooled_degenerate,
    });
    Ok(rows)
}

/// Options for [`kfold_evaluate`].
#[derive(Debug, Clone)]
pub struct KfoldOptions {
    pub point_estimate: PointEstimate,
    pub fold_scheme: FoldScheme,
    pub n_eval_samples: usize,
}

impl Default for KfoldOptions {
    fn default() -> Self {
        Self {
            point_estimate: PointEstimate::Mean,
            fold_scheme: FoldScheme::Contiguous,
            n_eval_samples: 200,
        }
    }
}

/// Fold index lists for a dataset under the chosen scheme.
pub fn fold_indices(
    n: usize,
    k: usize,
    scheme: FoldScheme,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    match scheme {
        FoldScheme::Contiguous => {
            Ok(fold_partition(n, k)?.into_iter().map(|r| r.collect()).collect())
        }
        FoldScheme::Shuffled => shuffled_folds(n, k, seed),
    }
}

/// Sequential k-fold evaluation of several configurations over several
/// seeds. Deterministic; the CLI parallelizes the same tasks.
pub fn kfold_evaluate(
    dataset: &CensoredDataset,
    configs: &[(String, ModelConfig)],
    k: usize,
    seeds: &[u64],
    options: &KfoldOptions,
) -> Result<EvalReport> {
    dataset.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config(String::from("need at least one seed")));
    }
    let mut rows = Vec::new();
    for (config_index, (name, config)) in configs.iter().enumerate() {
        for &seed in seeds {
            let folds = fold_indices(dataset.n_points(), k, options.fold_scheme, seed)?;
            for (fold, indices) in folds.iter().enumerate() {
                let task = EvalTask {
                    model_name: name.clone(),
                    config_index,
                    fold,
                    seed,
                    n_eval_samples: options.n_eval_samples,
                    point_estimate: options.point_estimate,
                };
                rows.extend(run_eval_task(dataset, indices, config, &task)?);
            }
        }
    }
    let aggregates = EvalReport::aggregate(&rows);
    Ok(EvalReport {
        k,
        seeds: seeds.to_vec(),
        point_estimate: options.point_estimate,
        fold_scheme: options.fold_scheme,
        config_digests: configs.iter().map(|(n, c)| (n.clone(), config_digest(c))).collect(),
        rows,
        aggregates,
    })
}

/// Stable digest of a configuration via its debug rendering.
pub fn config_digest(config: &ModelConfig) -> u64 {
    fnv1a(format!("{config:?}").as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_samples(params: Vec<f64>, n_points: usize, n_samples: usize) -> PredictiveSamples {
        PredictiveSamples::from_rows(n_points, n_samples, params, 2)
    }

    #[test]
    fn nlpd_single_gaussian_mode() {
        // one point, one sample, f = y, var = 1: -log N(0) = 0.918939
        let samples = gaussian_samples(alloc::vec![2.0, 1.0], 1, 1);
        let out = nlpd(&samples, &[2.0], &LikelihoodSpec::gaussian(false)).unwrap();
        assert!((out.value - 0.9189385332046727).abs() < 1e-12);
        assert!(out.degenerate_points.is_empty());
    }

    #[test]
    fn nlpd_log_mean_exp_of_two_densities() {
        // two Gaussian samples (var 1/4) whose densities at y are 0.2 and 0.4
        let var = 0.25;
        let f_for_density = |y: f64, p: f64| {
            // N(y | f, v) = p  =>  f = y + sqrt(-2 v ln(p √(2πv)))
            y + (-2.0 * var * (p * (2.0 * core::f64::consts::PI * var).sqrt()).ln()).sqrt()
        };
        let y = 0.7;
        let params = alloc::vec![f_for_density(y, 0.2), var, f_for_density(y, 0.4), var];
        let samples = gaussian_samples(params, 1, 2);
        let out = nlpd(&samples, &[y], &LikelihoodSpec::gaussian(false)).unwrap();
        assert!((out.value - (-0.3_f64.ln())).abs() < 1e-10, "got {}", out.value);
        assert!((out.value - 1.2039728043259361).abs() < 1e-10);
    }

    #[test]
    fn nlpd_poisson_matches_factorial_oracle() {
        let spec = LikelihoodSpec::poisson(false);
        let y = 5.0;
        let samples = PredictiveSamples::from_rows(1, 1, alloc::vec![5.0], 1);
        let out = nlpd(&samples, &[y], &spec).unwrap();
        let factorial: f64 = (1..=5).product::<u64>() as f64;
        let oracle = -(5.0 * 5.0_f64.ln() - 5.0 - factorial.ln());
        assert!((out.value - oracle).abs() < 1e-10);
    }

    #[test]
    fn nlpd_single_sample_degenerates_to_direct_log() {
        let spec = LikelihoodSpec::gaussian(false);
        let samples = gaussian_samples(alloc::vec![0.0, 2.0, 1.0, 0.5], 2, 1);
        let out = nlpd(&samples, &[0.3, 0.9], &spec).unwrap();
        let direct: f64 = [
            log_censored_generic(0.3, &[0.0, 2.0], &spec, false).unwrap(),
            log_censored_generic(0.9, &[1.0, 0.5], &spec, false).unwrap(),
        ]
        .iter()
        .sum();
        assert!((out.value + direct).abs() < 1e-12);
    }

    #[test]
    fn mae_values() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mae(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(mae(&[-3.0], &[3.0]).unwrap(), 6.0);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn r_squared_values() {
        assert_eq!(r_squared(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap(), 1.0);
        // predicting the mean gives exactly zero
        let ybar = 7.0 / 3.0;
        let r = r_squared(&[ybar, ybar, ybar], &[1.0, 2.0, 4.0]).unwrap();
        assert!(r.abs() < 1e-12);
        // hand value: 1 - 1/(14/3)
        let r = r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 11.0 / 14.0).abs() < 1e-12);
        assert!(r_squared(&[1.0, 2.0], &[3.0, 3.0]).is_err());
    }

    #[test]
    fn metrics_match_straight_loop_oracles_on_random_data() {
        let mut rng = crate::rng::Xoshiro256::seed_from(77);
        for _ in 0..100 {
            let n = 2 + (rng.next_u64() % 40) as usize;
            let pred: Vec<f64> = (0..n).map(|_| rng.standard_normal() * 3.0).collect();
            let truth: Vec<f64> = (0..n).map(|_| rng.standard_normal() * 2.0 + 0.5).collect();
            let mut abs_sum = 0.0;
            for i in 0..n {
                abs_sum += (pred[i] - truth[i]).abs();
            }
            assert!((mae(&pred, &truth).unwrap() - abs_sum / n as f64).abs() < 1e-10);
            let mean = truth.iter().sum::<f64>() / n as f64;
            let mut sse = 0.0;
            let mut sst = 0.0;
            for i in 0..n {
                sse += (truth[i] - pred[i]) * (truth[i] - pred[i]);
                sst += (truth[i] - mean) * (truth[i] - mean);
            }
            let oracle = 1.0 - sse / sst;
            assert!((r_squared(&pred, &truth).unwrap() - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn fold_partition_properties() {
        // k = n is leave-one-out
        let folds = fold_partition(7, 7).unwrap();
        assert_eq!(folds.len(), 7);
        assert!(folds.iter().all(|r| r.len() == 1));
        // k = 5, n = 100: disjoint size-20 blocks covering everything
        let folds = fold_partition(100, 5).unwrap();
        assert!(folds.iter().all(|r| r.len() == 20));
        let mut seen = alloc::vec![false; 100];
        for r in &folds {
            for i in r.clone() {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert!(fold_partition(3, 5).is_err());
        assert!(fold_partition(10, 1).is_err());
    }

    #[test]
    fn shuffled_folds_partition_and_reproduce() {
        let a = shuffled_folds(23, 4, 9).unwrap();
        let b = shuffled_folds(23, 4, 9).unwrap();
        assert_eq!(a, b);
        let mut seen = alloc::vec![false; 23];
        for fold in &a {
            for &i in fold {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let rows = alloc::vec![
            MetricRow {
                model: String::from("m"),
                output: Some(0),
                fold: 0,
                seed: 1,
                nlpd: 2.0,
                mae: 1.0,
                r2: Some(0.5),
                degenerate_points: 0
            },
            MetricRow {
                model: String::from("m"),
                output: Some(0),
                fold: 1,
                seed: 1,
                nlpd: 4.0,
                mae: 3.0,
                r2: Some(0.7),
                degenerate_points: 0
            },
        ];
        let agg = EvalReport::aggregate(&rows);
        let nlpd_row = agg.iter().find(|a| a.metric == "nlpd").unwrap();
        assert!((nlpd_row.mean - 3.0).abs() < 1e-15);
        assert!((nlpd_row.std - 1.0).abs() < 1e-15);
        let r2_row = agg.iter().find(|a| a.metric == "r2").unwrap();
        assert!((r2_row.mean - 0.6).abs() < 1e-12);
    }

    #[test]
    fn pearson_sign_and_scale() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        assert!((pearson(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c = [4.0, 3.0, 2.0, 1.0];
        assert!((pearson(&a, &c).unwrap() + 1.0).abs() < 1e-12);
    }
}
