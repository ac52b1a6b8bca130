//! Flat parameter-vector layout for one trainable model.
//!
//! Ordering: hyper-parameters θ first (kernel log-parameters and mixing
//! weights per latent family, then per-output free scalars), variational
//! parameters φ after (per family, per output: mean, strict lower triangle,
//! log-diagonal). `freeze_theta` masks the range `0..theta_end`.

use alloc::vec::Vec;
use core::ops::Range;

use crate::likelihood::{Family, Link};
use crate::model::config::{LmcShape, ModelConfig};

/// Which latent parameter of the likelihood a GP family feeds, and how the
/// remaining parameters are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeScalarKind {
    /// exp(raw) is the Gaussian noise variance, one scalar shared by every
    /// output of a joint fit.
    LogNoiseVariance,
    /// link(raw) is a per-output negative-binomial dispersion α.
    RawDispersion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelSlot {
    pub log_variance: usize,
    pub log_lengthscale: usize,
}

/// Mixing weights for one latent kernel: trainable block or pinned at 1
/// (the degenerate single-output, rank-one case has no freedom worth a
/// parameter).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightSlot {
    Trainable { start: usize, rows: usize, cols: usize },
    FixedOne,
}

/// Variational parameters of one latent function (one output, one family).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiSlot {
    pub mu: Range<usize>,
    /// strict lower triangle, row-major, length n(n-1)/2
    pub off_diag: Range<usize>,
    /// log of the Cholesky diagonal, length n
    pub log_diag: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyLayout {
    /// Index j of the likelihood parameter this family models.
    pub param_index: usize,
    /// Link applied to latent draws of this family.
    pub link: Link,
    pub kernels: Vec<KernelSlot>,
    pub weights: Vec<WeightSlot>,
    pub phi: Vec<PhiSlot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub n_points: usize,
    pub d_outputs: usize,
    pub families: Vec<FamilyLayout>,
    pub free_scalars: Option<(FreeScalarKind, Range<usize>)>,
    pub theta_end: usize,
    pub n_total: usize,
}

impl ParamLayout {
    pub fn build(config: &ModelConfig, n_points: usize) -> Self {
        let d = config.d_outputs;
        let mut cursor = 0usize;

        let family_shapes: Vec<(usize, &LmcShape)> = {
            let mut fs = alloc::vec![(0usize, &config.lmc_f)];
            if config.heteroscedastic {
                fs.push((1, config.lmc_g.as_ref().expect("validated")));
            }
            fs
        };

        // θ: kernels and weights per family
        let mut families: Vec<FamilyLayout> = Vec::new();
        for &(param_index, shape) in &family_shapes {
            let mut kernels = Vec::new();
            let mut weights = Vec::new();
            for &rank in &shape.ranks {
                kernels.push(KernelSlot { log_variance: cursor, log_lengthscale: cursor + 1 });
                cursor += 2;
                if d == 1 && shape.n_latents() == 1 && rank == 1 {
                    weights.push(WeightSlot::FixedOne);
                } else {
                    weights.push(WeightSlot::Trainable { start: cursor, rows: d, cols: rank });
                    cursor += d * rank;
                }
            }
            families.push(FamilyLayout {
                param_index,
                link: config.likelihood.links[param_index],
                kernels,
                weights,
                phi: Vec::new(),
            });
        }

        // θ: free scalars for the non-GP likelihood parameters; the Gaussian
        // noise is a single σ shared across outputs, dispersions are
        // per-output
        let free_scalars = match (config.likelihood.family, config.heteroscedastic) {
            (Family::Gaussian, false) => {
                let r = cursor..cursor + 1;
                cursor += 1;
                Some((FreeScalarKind::LogNoiseVariance, r))
            }
            (Family::NegativeBinomial, false) => {
                let r = cursor..cursor + d;
                cursor += d;
                Some((FreeScalarKind::RawDispersion, r))
            }
            _ => None,
        };
        let theta_end = cursor;

        // φ: per family, per output
        let tri = n_points * (n_points.saturating_sub(1)) / 2;
        for fam in families.iter_mut() {
            for _ in 0..d {
                let mu = cursor..cursor + n_points;
                cursor += n_points;
                let off_diag = cursor..cursor + tri;
                cursor += tri;
                let log_diag = cursor..cursor + n_points;
                cursor += n_points;
                fam.phi.push(PhiSlot { mu, off_diag, log_diag });
            }
        }

        ParamLayout {
            n_points,
            d_outputs: d,
            families,
            free_scalars,
            theta_end,
            n_total: cursor,
        }
    }

    /// Copies the packed lower Cholesky factor (diagonal exponentiated) of
    /// one latent posterior out of the flat parameter vector.
    pub fn packed_chol_values(&self, params: &[f64], family: usize, output: usize) -> Vec<f64> {
        let slot = &self.families[family].phi[output];
        let n = self.n_points;
        let mut packed = alloc::vec![0.0; n * (n + 1) / 2];
        let mut off = slot.off_diag.start;
        for i in 0..n {
            let row0 = i * (i + 1) / 2;
            for j in 0..i {
                packed[row0 + j] = params[off];
                off += 1;
            }
            packed[row0 + i] = crate::math::exp(params[slot.log_diag.start + i]);
        }
        packed
    }
}
