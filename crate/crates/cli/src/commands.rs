//! The four batch commands: simulate, fit, predict, evaluate.
//!
//! Every command validates its inputs before writing anything, writes
//! outputs atomically into the run directory, and drops a `run_config.json`
//! echo alongside them. Outputs contain no timestamps; a fixed seed gives
//! byte-identical files.

use serde_json::json;

use hmocgp_core::metrics::{self, EvalReport, EvalTask};
use hmocgp_core::model::{fit, predict, predict_at, TrainedModel};
use hmocgp_core::rng::{derive_seed, Xoshiro256};
use hmocgp_core::sim;

use crate::config::{apply_variant, EvaluateConfig, FitConfig, Protocol, SimulateConfig};
use crate::csvio;
use crate::error::{CliError, Result};
use crate::{checkpoint, runner};

pub struct GlobalOpts {
    pub out_dir: String,
    pub seed: Option<u64>,
    pub threads: usize,
    pub deterministic: bool,
}

impl GlobalOpts {
    fn ensure_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))
    }

    fn path(&self, name: &str) -> String {
        format!("{}/{}", self.out_dir.trim_end_matches('/'), name)
    }

    fn write_run_config(&self, command: &str, config_json: serde_json::Value) -> Result<()> {
        let echo = json!({
            "schema_version": crate::config::SCHEMA_VERSION,
            "command": command,
            "config": config_json,
            "seed_override": self.seed,
            "threads": self.threads,
            "deterministic": self.deterministic,
        });
        let text = serde_json::to_string_pretty(&echo).expect("serializable");
        csvio::write_atomic(&self.path("run_config.json"), &text)
    }
}

pub fn cmd_simulate(config_path: &str, opts: &GlobalOpts) -> Result<()> {
    let mut cfg = SimulateConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.spec.seed = seed;
    }
    let seed = cfg.spec.seed;

    let mut dataset = sim::simulate(&cfg.spec)?;
    match &cfg.protocol {
        Protocol::Interval => {}
        Protocol::Intensity { intensity, flag_probability } => {
            let mut rng = Xoshiro256::stream(seed, &[0x1f]);
            let n = dataset.n_points() * dataset.n_outputs();
            let flags: Vec<bool> = (0..n).map(|_| rng.bernoulli(*flag_probability)).collect();
            sim::apply_intensity_censoring(&mut dataset, &flags, *intensity)?;
        }
        Protocol::SupplyProxy { offset, noise_sd, integer_outputs, outputs } => {
            let targets: Vec<usize> = if outputs.is_empty() {
                (0..dataset.n_outputs()).collect()
            } else {
                outputs.clone()
            };
            for &d in &targets {
                if d >= dataset.n_outputs() {
                    return Err(CliError::Config {
                        path: config_path.into(),
                        message: format!("protocol output {d} out of range"),
                    });
                }
                let truth = dataset.true_y.clone().ok_or_else(|| CliError::Config {
                    path: config_path.into(),
                    message: "supply proxy needs generated true values".into(),
                })?;
                let mut rng = Xoshiro256::stream(seed, &[0x2f, d as u64]);
                let dropoffs: Vec<f64> = (0..dataset.n_points())
                    .map(|i| (truth[(i, d)] + offset + noise_sd * rng.standard_normal()).max(0.0))
                    .collect();
                let mut censor_rng = Xoshiro256::stream(seed, &[0x30, d as u64]);
                sim::apply_supply_proxy_censoring(
                    &mut dataset,
                    d,
                    &dropoffs,
                    *integer_outputs,
                    &mut censor_rng,
                )?;
            }
        }
    }

    opts.ensure_out_dir()?;
    csvio::write_atomic(&opts.path("data.csv"), &csvio::dataset_to_csv(&dataset))?;
    let meta = json!({
        "schema_version": crate::config::SCHEMA_VERSION,
        "generator": cfg.spec,
        "protocol": cfg.protocol,
        "effective_seed": seed,
        "threshold_rule": "running minimum of the true values per region, pushed 25% of its magnitude further down",
    });
    csvio::write_atomic(
        &opts.path("data.meta.json"),
        &serde_json::to_string_pretty(&meta).expect("serializable"),
    )?;
    opts.write_run_config("simulate", serde_json::to_value(&cfg).expect("serializable"))
}

pub fn cmd_fit(
    data_path: &str,
    config_path: &str,
    variant: Option<&str>,
    opts: &GlobalOpts,
) -> Result<()> {
    let cfg = FitConfig::load(config_path)?;
    let dataset = csvio::read_dataset(data_path)?;
    let mut model_cfg = cfg.model.clone();
    if let Some(name) = variant {
        let v = hmocgp_core::model::Variant::parse(name)?;
        model_cfg = apply_variant(&model_cfg, v);
    }
    if let Some(seed) = opts.seed {
        model_cfg.training.seed = seed;
    }
    if model_cfg.d_outputs != dataset.n_outputs() {
        return Err(CliError::Config {
            path: config_path.into(),
            message: format!(
                "model expects {} outputs, dataset has {}",
                model_cfg.d_outputs,
                dataset.n_outputs()
            ),
        });
    }

    let trained = fit(&dataset, None, &model_cfg)?;

    opts.ensure_out_dir()?;
    checkpoint::save(&opts.path("checkpoint.json"), &trained)?;
    csvio::write_atomic(
        &opts.path("trace.csv"),
        &csvio::trace_to_csv(&trained.diagnostics.elbo_trace),
    )?;
    opts.write_run_config(
        "fit",
        json!({
            "data": data_path,
            "model": model_cfg,
            "variant_override": variant,
        }),
    )
}

pub fn cmd_predict(
    checkpoint_path: &str,
    inputs_path: &str,
    n_samples: usize,
    opts: &GlobalOpts,
) -> Result<()> {
    let model: TrainedModel = checkpoint::load(checkpoint_path)?;
    let x = csvio::read_inputs(inputs_path)?;
    if x.n_cols() != model.submodels[0].training_inputs.n_cols() {
        return Err(CliError::Config {
            path: inputs_path.into(),
            message: format!(
                "inputs have {} columns, model was trained on {}",
                x.n_cols(),
                model.submodels[0].training_inputs.n_cols()
            ),
        });
    }
    let seed = opts.seed.unwrap_or(0);
    let pred = predict(&model, &x, n_samples, seed)?;
    opts.ensure_out_dir()?;
    csvio::write_atomic(&opts.path("predictions.csv"), &csvio::predictions_to_csv(&x, &pred))?;
    opts.write_run_config(
        "predict",
        json!({
            "checkpoint": checkpoint_path,
            "inputs": inputs_path,
            "samples": n_samples,
        }),
    )
}

pub fn cmd_evaluate(data_path: &str, config_path: &str, opts: &GlobalOpts) -> Result<()> {
    let mut cfg = EvaluateConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.seeds = vec![seed];
    }
    let dataset = csvio::read_dataset(data_path)?;
    if cfg.base_model.d_outputs != dataset.n_outputs() {
        return Err(CliError::Config {
            path: config_path.into(),
            message: format!(
                "base model expects {} outputs, dataset has {}",
                cfg.base_model.d_outputs,
                dataset.n_outputs()
            ),
        });
    }

    let configs: Vec<(String, hmocgp_core::ModelConfig)> = cfg
        .variants
        .iter()
        .map(|&v| (v.name().to_string(), apply_variant(&cfg.base_model, v)))
        .collect();

    // task list: variant-major, then seed, then fold
    struct TaskSpec {
        config_index: usize,
        seed: u64,
        fold: usize,
        indices: Vec<usize>,
    }
    let mut tasks: Vec<TaskSpec> = Vec::new();
    for (config_index, _) in configs.iter().enumerate() {
        for &seed in &cfg.seeds {
            let folds =
                metrics::fold_indices(dataset.n_points(), cfg.k, cfg.fold_scheme, seed)
                    .map_err(CliError::Core)?;
            for (fold, indices) in folds.into_iter().enumerate() {
                tasks.push(TaskSpec { config_index, seed, fold, indices });
            }
        }
    }

    let rows_nested = runner::run_indexed(tasks.len(), opts.threads, |i| {
        let t = &tasks[i];
        let (name, config) = &configs[t.config_index];
        let task = EvalTask {
            model_name: name.clone(),
            config_index: t.config_index,
            fold: t.fold,
            seed: t.seed,
            n_eval_samples: cfg.eval_samples,
            point_estimate: cfg.point_estimate,
        };
        metrics::run_eval_task(&dataset, &t.indices, config, &task).map_err(CliError::Core)
    })?;
    let rows: Vec<metrics::MetricRow> = rows_nested.into_iter().flatten().collect();
    let aggregates = EvalReport::aggregate(&rows);
    let report = EvalReport {
        k: cfg.k,
        seeds: cfg.seeds.clone(),
        point_estimate: cfg.point_estimate,
        fold_scheme: cfg.fold_scheme,
        config_digests: configs
            .iter()
            .map(|(n, c)| (n.clone(), metrics::config_digest(c)))
            .collect(),
        rows,
        aggregates,
    };

    opts.ensure_out_dir()?;
    csvio::write_atomic(
        &opts.path("report.json"),
        &serde_json::to_string_pretty(&report).expect("serializable"),
    )?;
    csvio::write_atomic(&opts.path("metrics.csv"), &csvio::metrics_to_csv(&report))?;
    csvio::write_atomic(&opts.path("table.csv"), &csvio::table_to_csv(&report))?;

    if cfg.plot_data {
        // full-data fits with the first seed supply the figure data
        let plot_seed = cfg.seeds[0];
        let plots = runner::run_indexed(configs.len(), opts.threads, |i| {
            let (name, config) = &configs[i];
            let mut c = config.clone();
            c.training.seed = derive_seed(plot_seed, &[0x9d, i as u64]);
            let model = fit(&dataset, None, &c).map_err(CliError::Core)?;
            let pred = predict_at(&model, &dataset, cfg.eval_samples, derive_seed(c.training.seed, &[0x9e]))
                .map_err(CliError::Core)?;
            Ok::<_, CliError>((name.clone(), csvio::plot_data_to_csv(&dataset, &pred)))
        })?;
        for (name, text) in plots {
            csvio::write_atomic(&opts.path(&format!("plot_{name}.csv")), &text)?;
        }
    }

    opts.write_run_config("evaluate", serde_json::to_value(&cfg).expect("serializable"))
}
