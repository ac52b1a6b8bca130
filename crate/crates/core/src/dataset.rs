//! Observation container with right-censoring annotations.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Inputs, observed outputs, censoring flags and thresholds, plus the true
/// (non-censored) outputs when they are known (synthetic or evaluation data).
///
/// Right-censoring contract: a censored observation records the threshold
/// itself (`y == threshold`), a non-censored one lies strictly below any
/// recorded threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredDataset {
    /// N×p input matrix.
    pub x: Mat,
    /// N×D observed outputs.
    pub y: Mat,
    /// Row-major N×D censoring flags.
    pub censored: Vec<bool>,
    /// Row-major N×D thresholds, present at least wherever censored.
    pub thresholds: Vec<Option<f64>>,
    /// N×D true outputs, when known.
    pub true_y: Option<Mat>,
}

impl CensoredDataset {
    /// A fully non-censored dataset over the given inputs and outputs.
    pub fn uncensored(x: Mat, y: Mat) -> Self {
        let n = y.n_rows() * y.n_cols();
        Self {
            x,
            y,
            censored: alloc::vec![false; n],
            thresholds: alloc::vec![None; n],
            true_y: None,
        }
    }

    pub fn n_points(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_outputs(&self) -> usize {
        self.y.n_cols()
    }

    pub fn n_inputs(&self) -> usize {
        self.x.n_cols()
    }

    #[inline]
    fn flat(&self, n: usize, d: usize) -> usize {
        n * self.n_outputs() + d
    }

    pub fn is_censored(&self, n: usize, d: usize) -> bool {
        self.censored[self.flat(n, d)]
    }

    pub fn threshold(&self, n: usize, d: usize) -> Option<f64> {
        self.thresholds[self.flat(n, d)]
    }

    pub fn set_censored(&mut self, n: usize, d: usize, value: bool) {
        let i = self.flat(n, d);
        self.censored[i] = value;
    }

    pub fn set_threshold(&mut self, n: usize, d: usize, value: Option<f64>) {
        let i = self.flat(n, d);
        self.thresholds[i] = value;
    }

    /// Evaluation targets: the true outputs when present, the observed ones
    /// otherwise.
    pub fn eval_targets(&self) -> &Mat {
        self.true_y.as_ref().unwrap_or(&self.y)
    }

    /// Enforces the censoring contract, reporting the first offending point.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_points();
        let d_out = self.n_outputs();
        if self.y.n_rows() != n {
            return Err(Error::ShapeMismatch { context: "dataset outputs", expected: n, got: self.y.n_rows() });
        }
        if self.censored.len() != n * d_out || self.thresholds.len() != n * d_out {
            return Err(Error::ShapeMismatch {
                context: "censoring annotations",
                expected: n * d_out,
                got: self.censored.len(),
            });
        }
        if let Some(t) = &self.true_y {
            if t.n_rows() != n || t.n_cols() != d_out {
                return Err(Error::ShapeMismatch { context: "true outputs", expected: n * d_out, got: t.n_rows() * t.n_cols() });
            }
        }
        for i in 0..n {
            for d in 0..d_out {
                let y = self.y[(i, d)];
                if !y.is_finite() {
                    return Err(Error::Data(format!("non-finite observation at point {i}, output {d}")));
                }
                let thr = self.threshold(i, d);
                if self.is_censored(i, d) {
                    match thr {
                        None => {
                            return Err(Error::Data(format!(
                                "point {i}, output {d}: censored without a threshold"
                            )))
                        }
                        Some(t) if y != t => {
                            return Err(Error::Data(format!(
                                "point {i}, output {d}: censored but y = {y} differs from threshold {t}"
                            )))
                        }
                        _ => {}
                    }
                } else if let Some(t) = thr {
                    if y >= t {
                        return Err(Error::Data(format!(
                            "point {i}, output {d}: non-censored but y = {y} is not below threshold {t}"
                        )));
                    }
                }
                if let Some(t) = &self.true_y {
                    if t[(i, d)] < y {
                        return Err(Error::Data(format!(
                            "point {i}, output {d}: true value {} below observed {y}",
                            t[(i, d)]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Single-output view used to fit the non-multi-output variants.
    pub fn select_output(&self, d: usize) -> CensoredDataset {
        let n = self.n_points();
        let mut y = Mat::zeros(n, 1);
        let mut censored = Vec::with_capacity(n);
        let mut thresholds = Vec::with_capacity(n);
        for i in 0..n {
            y[(i, 0)] = self.y[(i, d)];
            censored.push(self.is_censored(i, d));
            thresholds.push(self.threshold(i, d));
        }
        let true_y = self.true_y.as_ref().map(|t| {
            let mut out = Mat::zeros(n, 1);
            for i in 0..n {
                out[(i, 0)] = t[(i, d)];
            }
            out
        });
        CensoredDataset { x: self.x.clone(), y, censored, thresholds, true_y }
    }

    /// Dataset restricted to the given point indices (order preserved).
    pub fn subset(&self, indices: &[usize]) -> CensoredDataset {
        let d_out = self.n_outputs();
        let p = self.n_inputs();
        let mut x = Mat::zeros(indices.len(), p);
        let mut y = Mat::zeros(indices.len(), d_out);
        let mut censored = Vec::with_capacity(indices.len() * d_out);
        let mut thresholds = Vec::with_capacity(indices.len() * d_out);
        for (row, &i) in indices.iter().enumerate() {
            for j in 0..p {
                x[(row, j)] = self.x[(i, j)];
            }
            for d in 0..d_out {
                y[(row, d)] = self.y[(i, d)];
                censored.push(self.is_censored(i, d));
                thresholds.push(self.threshold(i, d));
            }
        }
        let true_y = self.true_y.as_ref().map(|t| {
            let mut out = Mat::zeros(indices.len(), d_out);
            for (row, &i) in indices.iter().enumerate() {
                for d in 0..d_out {
                    out[(row, d)] = t[(i, d)];
                }
            }
            out
        });
        CensoredDataset { x, y, censored, thresholds, true_y }
    }
}
