//! CSV file formats: datasets, predictions, training traces, plot data and
//! flat metric tables.
//!
//! Dataset schema (UTF-8, header row, '.' decimal separator):
//! `x0..x{p-1}`, `y_<d>`, optional `cen_<d>` in {0,1}, `thr_<d>`,
//! `true_<d>` with outputs indexed from 1. Threshold cells may be empty.
//! Unknown columns are rejected.

use std::fmt::Write as _;

use hmocgp_core::dataset::CensoredDataset;
use hmocgp_core::linalg::Mat;
use hmocgp_core::metrics::{EvalReport, PointEstimate};
use hmocgp_core::model::Prediction;

use crate::error::{CliError, Result};

/// Writes a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &str, contents: &str) -> Result<()> {
    let tmp = format!("{path}.tmp");
    std::fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip decimal form; reparses to the identical bits
    format!("{v}")
}

pub fn dataset_to_csv(ds: &CensoredDataset) -> String {
    let p = ds.n_inputs();
    let d_out = ds.n_outputs();
    let has_thr = ds.thresholds.iter().any(|t| t.is_some());
    let has_true = ds.true_y.is_some();
    let mut out = String::new();
    let mut header: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    for d in 0..d_out {
        header.push(format!("y_{}", d + 1));
    }
    for d in 0..d_out {
        header.push(format!("cen_{}", d + 1));
    }
    if has_thr {
        for d in 0..d_out {
            header.push(format!("thr_{}", d + 1));
        }
    }
    if has_true {
        for d in 0..d_out {
            header.push(format!("true_{}", d + 1));
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..ds.n_points() {
        let mut fields: Vec<String> = Vec::with_capacity(header.len());
        for j in 0..p {
            fields.push(fmt_f64(ds.x[(i, j)]));
        }
        for d in 0..d_out {
            fields.push(fmt_f64(ds.y[(i, d)]));
        }
        for d in 0..d_out {
            fields.push(if ds.is_censored(i, d) { "1".into() } else { "0".into() });
        }
        if has_thr {
            for d in 0..d_out {
                fields.push(ds.threshold(i, d).map(fmt_f64).unwrap_or_default());
            }
        }
        if has_true {
            let t = ds.true_y.as_ref().unwrap();
            for d in 0..d_out {
                fields.push(fmt_f64(t[(i, d)]));
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

struct ColumnMap {
    x: Vec<usize>,
    y: Vec<usize>,
    cen: Vec<Option<usize>>,
    thr: Vec<Option<usize>>,
    truth: Vec<Option<usize>>,
}

fn parse_header(path: &str, header: &str) -> Result<ColumnMap> {
    let names: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
    let mut x = Vec::new();
    let mut y: Vec<(usize, usize)> = Vec::new();
    let mut cen: Vec<(usize, usize)> = Vec::new();
    let mut thr: Vec<(usize, usize)> = Vec::new();
    let mut truth: Vec<(usize, usize)> = Vec::new();
    for (col, name) in names.iter().enumerate() {
        let bad = |msg: String| CliError::Parse { path: path.into(), line: 1, message: msg };
        if let Some(idx) = name.strip_prefix('x') {
            let k: usize = idx.parse().map_err(|_| bad(format!("bad input column '{name}'")))?;
            if k != x.len() {
                return Err(bad(format!("input columns must be x0..x{{p-1}} in order, found '{name}'")));
            }
            x.push(col);
        } else if let Some(idx) = name.strip_prefix("y_") {
            let d: usize = idx.parse().map_err(|_| bad(format!("bad output column '{name}'")))?;
            y.push((d, col));
        } else if let Some(idx) = name.strip_prefix("cen_") {
            let d: usize = idx.parse().map_err(|_| bad(format!("bad column '{name}'")))?;
            cen.push((d, col));
        } else if let Some(idx) = name.strip_prefix("thr_") {
            let d: usize = idx.parse().map_err(|_| bad(format!("bad column '{name}'")))?;
            thr.push((d, col));
        } else if let Some(idx) = name.strip_prefix("true_") {
            let d: usize = idx.parse().map_err(|_| bad(format!("bad column '{name}'")))?;
            truth.push((d, col));
        } else {
            return Err(bad(format!("unknown column '{name}'")));
        }
    }
    let bad = |msg: String| CliError::Parse { path: path.into(), line: 1, message: msg };
    if x.is_empty() {
        return Err(bad("no input columns (x0, x1, ...)".into()));
    }
    if y.is_empty() {
        return Err(bad("no output columns (y_1, y_2, ...)".into()));
    }
    let d_out = y.len();
    let order = |mut v: Vec<(usize, usize)>, what: &str| -> Result<Vec<usize>> {
        v.sort_by_key(|(d, _)| *d);
        for (expect, (d, _)) in v.iter().enumerate() {
            if *d != expect + 1 {
                return Err(CliError::Parse {
                    path: path.into(),
                    line: 1,
                    message: format!("{what} columns must be numbered 1..D without gaps"),
                });
            }
        }
        Ok(v.into_iter().map(|(_, c)| c).collect())
    };
    let y = order(y, "y")?;
    let to_opt = |v: Vec<(usize, usize)>, what: &str| -> Result<Vec<Option<usize>>> {
        if v.is_empty() {
            return Ok(vec![None; d_out]);
        }
        let cols = order(v, what)?;
        if cols.len() != d_out {
            return Err(CliError::Parse {
                path: path.into(),
                line: 1,
                message: format!("{what} columns must cover all {d_out} outputs"),
            });
        }
        Ok(cols.into_iter().map(Some).collect())
    };
    Ok(ColumnMap {
        x,
        y,
        cen: to_opt(cen, "cen")?,
        thr: to_opt(thr, "thr")?,
        truth: to_opt(truth, "true")?,
    })
}

/// Parses a dataset CSV, validating the censoring contract; errors carry
/// 1-based file line numbers.
pub fn dataset_from_csv(path: &str, text: &str) -> Result<CensoredDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| CliError::Parse {
        path: path.into(),
        line: 1,
        message: "empty file".into(),
    })?;
    let map = parse_header(path, header)?;
    let p = map.x.len();
    let d_out = map.y.len();

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut cen: Vec<bool> = Vec::new();
    let mut thr: Vec<Option<f64>> = Vec::new();
    let mut tru: Vec<f64> = Vec::new();
    let has_true = map.truth[0].is_some();
    let mut n = 0usize;
    for (lineno0, line) in lines {
        let line_no = lineno0 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        let get = |col: usize| -> Result<&str> {
            fields.get(col).copied().ok_or_else(|| CliError::Parse {
                path: path.into(),
                line: line_no,
                message: format!("missing column {col}"),
            })
        };
        let parse_f = |col: usize| -> Result<f64> {
            let s = get(col)?;
            s.parse::<f64>().map_err(|_| CliError::Parse {
                path: path.into(),
                line: line_no,
                message: format!("cannot parse '{s}' as a number"),
            })
        };
        for &c in &map.x {
            xs.push(parse_f(c)?);
        }
        for &c in &map.y {
            ys.push(parse_f(c)?);
        }
        for d in 0..d_out {
            let flag = match map.cen[d] {
                None => false,
                Some(c) => match get(c)? {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(CliError::Parse {
                            path: path.into(),
                            line: line_no,
                            message: format!("censoring flag must be 0 or 1, got '{other}'"),
                        })
                    }
                },
            };
            cen.push(flag);
            let t = match map.thr[d] {
                None => None,
                Some(c) => {
                    let s = get(c)?;
                    if s.is_empty() {
                        None
                    } else {
                        Some(parse_f(c)?)
                    }
                }
            };
            thr.push(t);
            if let Some(c) = map.truth[d] {
                tru.push(parse_f(c)?);
            }
        }
        let _ = p;
        n += 1;
    }

    let ds = CensoredDataset {
        x: Mat::from_vec(n, p, xs),
        y: Mat::from_vec(n, d_out, ys),
        censored: cen,
        thresholds: thr,
        true_y: if has_true { Some(Mat::from_vec(n, d_out, tru)) } else { None },
    };
    // map contract violations back to file lines (+1 for the header)
    ds.validate().map_err(|e| match &e {
        hmocgp_core::Error::Data(msg) => {
            let line = msg
                .strip_prefix("point ")
                .and_then(|rest| rest.split(',').next())
                .and_then(|idx| idx.parse::<usize>().ok())
                .map(|i| i + 2)
                .unwrap_or(1);
            CliError::Parse { path: path.into(), line, message: e.to_string() }
        }
        _ => CliError::Core(e),
    })?;
    Ok(ds)
}

pub fn read_dataset(path: &str) -> Result<CensoredDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    dataset_from_csv(path, &text)
}

/// Inputs-only CSV (x columns; extra dataset columns are tolerated and
/// ignored so predictions can run directly on dataset files).
pub fn read_inputs(path: &str) -> Result<Mat> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| CliError::Parse {
        path: path.into(),
        line: 1,
        message: "empty file".into(),
    })?;
    let mut x_cols = Vec::new();
    for (col, name) in header.split(',').map(|s| s.trim()).enumerate() {
        if let Some(idx) = name.strip_prefix('x') {
            if idx.parse::<usize>().is_ok() {
                x_cols.push(col);
            }
        }
    }
    if x_cols.is_empty() {
        return Err(CliError::Parse {
            path: path.into(),
            line: 1,
            message: "no input columns (x0, x1, ...)".into(),
        });
    }
    let mut data = Vec::new();
    let mut n = 0;
    for (lineno0, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        for &c in &x_cols {
            let s = fields.get(c).map(|s| s.trim()).unwrap_or("");
            let v: f64 = s.parse().map_err(|_| CliError::Parse {
                path: path.into(),
                line: lineno0 + 1,
                message: format!("cannot parse '{s}' as a number"),
            })?;
            data.push(v);
        }
        n += 1;
    }
    Ok(Mat::from_vec(n, x_cols.len(), data))
}

/// Predictions CSV: inputs echoed, then per output the latent moments per
/// parameter, predictive moments, and sample-quantile summary columns.
pub fn predictions_to_csv(x: &Mat, pred: &Prediction) -> String {
    let p = x.n_cols();
    let d_out = pred.d_outputs;
    let j_count = pred.latent_mean.first().map(|l| l.len()).unwrap_or(0);
    let mut header: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    for d in 0..d_out {
        for j in 0..j_count {
            header.push(format!("lat_mean_{}_{}", d + 1, j + 1));
            header.push(format!("lat_var_{}_{}", d + 1, j + 1));
        }
        header.push(format!("pred_mean_{}", d + 1));
        header.push(format!("pred_var_{}", d + 1));
        header.push(format!("mean_q025_{}", d + 1));
        header.push(format!("mean_q975_{}", d + 1));
    }
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..pred.n_points {
        let mut fields: Vec<String> = Vec::with_capacity(header.len());
        for j in 0..p {
            fields.push(fmt_f64(x[(i, j)]));
        }
        for d in 0..d_out {
            for j in 0..j_count {
                fields.push(fmt_f64(pred.latent_mean[d][j][i]));
                fields.push(fmt_f64(pred.latent_var[d][j][i]));
            }
            fields.push(fmt_f64(pred.pred_mean[(i, d)]));
            fields.push(fmt_f64(pred.pred_var[(i, d)]));
            let (lo, hi) = sample_mean_quantiles(pred, d, i, 0.025, 0.975);
            fields.push(fmt_f64(lo));
            fields.push(fmt_f64(hi));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn sample_mean_quantiles(pred: &Prediction, d: usize, i: usize, lo: f64, hi: f64) -> (f64, f64) {
    let samples = &pred.samples[d];
    let mut means: Vec<f64> = (0..samples.n_samples)
        .map(|s| hmocgp_core::likelihood::base_mean(samples.get(i, s), pred.family))
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
    (quantile_sorted(&means, lo), quantile_sorted(&means, hi))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Training-trace CSV (one file per fitted submodel concatenated with a
/// submodel column).
pub fn trace_to_csv(traces: &[Vec<(u32, f64)>]) -> String {
    let mut out = String::from("submodel,step,elbo\n");
    for (s, trace) in traces.iter().enumerate() {
        for (step, elbo) in trace {
            let _ = writeln!(out, "{s},{step},{}", fmt_f64(*elbo));
        }
    }
    out
}

/// Plot data: everything behind a predictive-band figure for one model.
pub fn plot_data_to_csv(ds: &CensoredDataset, pred: &Prediction) -> String {
    let mut out = String::from("output,x,pred_mean,pred_lo,pred_hi,y_obs,censored,y_true\n");
    let t = ds.eval_targets();
    for d in 0..ds.n_outputs() {
        for i in 0..ds.n_points() {
            let m = pred.pred_mean[(i, d)];
            let sd = pred.pred_var[(i, d)].max(0.0).sqrt();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                d + 1,
                fmt_f64(ds.x[(i, 0)]),
                fmt_f64(m),
                fmt_f64(m - 2.0 * sd),
                fmt_f64(m + 2.0 * sd),
                fmt_f64(ds.y[(i, d)]),
                u8::from(ds.is_censored(i, d)),
                fmt_f64(t[(i, d)]),
            );
        }
    }
    out
}

/// Flat metric table: one row per model × output × fold × seed × metric.
pub fn metrics_to_csv(report: &EvalReport) -> String {
    let mut out = String::from("model,output,fold,seed,metric,value\n");
    for row in &report.rows {
        let output = row.output.map(|d| (d + 1).to_string()).unwrap_or_else(|| "all".into());
        let mut push = |metric: &str, value: Option<f64>| {
            if let Some(v) = value {
                let _ = writeln!(out, "{},{},{},{},{},{}", row.model, output, row.fold, row.seed, metric, fmt_f64(v));
            }
        };
        push("nlpd", Some(row.nlpd));
        push("mae", Some(row.mae));
        push("r2", row.r2);
    }
    out
}

/// Aggregate table: mean ± std per model × output × metric.
pub fn table_to_csv(report: &EvalReport) -> String {
    let mut out = String::from("model,output,metric,mean,std,count\n");
    for a in &report.aggregates {
        let output = a.output.map(|d| (d + 1).to_string()).unwrap_or_else(|| "all".into());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            a.model,
            output,
            a.metric,
            fmt_f64(a.mean),
            fmt_f64(a.std),
            a.count
        );
    }
    out
}

/// Point-estimate helper shared by commands.
pub fn point_estimate_name(p: PointEstimate) -> &'static str {
    match p {
        PointEstimate::Mean => "mean",
        PointEstimate::Median => "median",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dataset() -> CensoredDataset {
        let x = Mat::from_vec(3, 1, vec![0.0, 0.5, 1.0]);
        let y = Mat::from_vec(3, 2, vec![1.0, 4.0, 2.5, 5.0, 3.0, 6.0]);
        let mut ds = CensoredDataset::uncensored(x, y.clone());
        let mut t = y;
        t[(1, 0)] = 3.25;
        ds.true_y = Some(t);
        ds.y[(1, 0)] = 2.5;
        ds.set_censored(1, 0, true);
        ds.set_threshold(1, 0, Some(2.5));
        ds
    }

    #[test]
    fn dataset_roundtrips_bit_exactly() {
        let ds = sample_dataset();
        let csv = dataset_to_csv(&ds);
        let back = dataset_from_csv("mem", &csv).unwrap();
        assert_eq!(ds, back);
        // and through a second render
        assert_eq!(csv, dataset_to_csv(&back));
    }

    #[test]
    fn minimal_file_defaults_to_uncensored() {
        let csv = "x0,y_1\n0,1.5\n1,2.5\n2,3.5\n";
        let ds = dataset_from_csv("mem", csv).unwrap();
        assert_eq!(ds.n_points(), 3);
        assert!(ds.censored.iter().all(|&c| !c));
        assert!(ds.true_y.is_none());
    }

    #[test]
    fn censored_row_with_mismatched_threshold_reports_its_line() {
        let csv = "x0,y_1,cen_1,thr_1\n0,1.0,0,\n1,2.0,1,2.5\n";
        let err = dataset_from_csv("mem", csv).unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_columns_are_rejected() {
        let csv = "x0,y_1,note\n0,1.0,hi\n";
        assert!(dataset_from_csv("mem", csv).is_err());
    }

    #[test]
    fn bad_flag_and_bad_number_report_lines() {
        let err = dataset_from_csv("mem", "x0,y_1,cen_1\n0,1.0,2\n").unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 2, .. }));
        let err = dataset_from_csv("mem", "x0,y_1\n0,abc\n").unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 2, .. }));
    }

    #[test]
    fn integer_counts_roundtrip_identically() {
        let x = Mat::from_vec(3, 1, vec![0.0, 1.0, 2.0]);
        let y = Mat::from_vec(3, 1, vec![4.0, 0.0, 17.0]);
        let mut ds = CensoredDataset::uncensored(x, y.clone());
        ds.true_y = Some(y);
        ds.set_censored(2, 0, true);
        ds.set_threshold(2, 0, Some(17.0));
        let csv = dataset_to_csv(&ds);
        let back = dataset_from_csv("mem", &csv).unwrap();
        assert_eq!(dataset_to_csv(&back), csv);
    }
}
