//! The stochastic variational objective.
//!
//! ELBO = (1/S) Σ_s Σ_d Σ_n log p(y_{n,d} | γ-sample s) − Σ_j KL_j, with one
//! closed-form KL per latent family between the block-diagonal variational
//! posterior over all outputs and the joint LMC prior. The joint prior is
//! what couples outputs: the likelihood factorizes per output, so the KL
//! term is the only place correlations between outputs enter the objective.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Real, Tape, Var};
use crate::dataset::CensoredDataset;
use crate::error::{Error, Result};
use crate::kernels::rbf_pair;
use crate::likelihood::{link_apply, log_censored_generic, Family};
use crate::linalg::{
    cholesky_with_jitter, default_base_jitter, log_det_from_factor, solve_lower, solve_lower_mat,
    CovMatrix, Mat,
};
use crate::math;
use crate::model::config::ModelConfig;
use crate::model::layout::{FreeScalarKind, ParamLayout, WeightSlot};
use crate::rng::Xoshiro256;

/// Tags for deriving independent noise streams.
pub(crate) const STREAM_EPS: u64 = 0x45;
pub(crate) const STREAM_INIT: u64 = 0x49;
pub(crate) const STREAM_EVAL: u64 = 0x56;
pub(crate) const STREAM_PREDICT: u64 = 0x50;

/// Reparameterization noise for one objective evaluation:
/// `eps[family][output]` holds S·N draws, sample-major.
#[derive(Debug, Clone)]
pub struct NoiseDraws {
    pub eps: Vec<Vec<Vec<f64>>>,
    pub n_samples: usize,
}

impl NoiseDraws {
    pub fn draw(streams: &mut [Vec<Xoshiro256>], n_points: usize, n_samples: usize) -> Self {
        let eps = streams
            .iter_mut()
            .map(|per_output| {
                per_output
                    .iter_mut()
                    .map(|rng| {
                        let mut buf = vec![0.0; n_samples * n_points];
                        rng.fill_standard_normal(&mut buf);
                        buf
                    })
                    .collect()
            })
            .collect();
        Self { eps, n_samples }
    }

    /// All-zero noise: samples collapse onto the posterior mean.
    pub fn zeros(n_families: usize, d_outputs: usize, n_points: usize, n_samples: usize) -> Self {
        Self {
            eps: vec![vec![vec![0.0; n_samples * n_points]; d_outputs]; n_families],
            n_samples,
        }
    }
}

/// Pieces of one objective evaluation, kept as tape nodes so gradients can
/// follow.
pub struct ElboParts<'t> {
    pub elbo: Var<'t>,
    pub kls: Vec<Var<'t>>,
    /// Likelihood sum per Monte-Carlo sample (primal values).
    pub per_sample_loglik: Vec<f64>,
    pub negbin_clamps: usize,
}

/// Plain-number view of one objective evaluation.
#[derive(Debug, Clone)]
pub struct ElboBreakdown {
    pub elbo: f64,
    pub expected_loglik: f64,
    pub kl: f64,
    pub kl_per_family: Vec<f64>,
    pub per_sample_loglik: Vec<f64>,
    pub negbin_clamps: usize,
}

/// A trainable model instance: configuration, layout, flat parameters and
/// cached input geometry. Covers all outputs jointly for multi-output
/// variants, or a single output otherwise.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
    pub x: Mat,
    /// packed lower pairwise squared distances over training inputs
    sqdists: Vec<f64>,
    /// Per-family diagonal nugget, fixed at initialization: 1e-4 of the
    /// initial prior's mean diagonal. Keeping it constant keeps the
    /// objective a coherent function of the parameters; a jitter that
    /// tracked the current prior would let hyper-parameter steps move the
    /// regularization itself, which destabilizes training in both
    /// directions (shrinking it silently, or inflating it into a free
    /// noise floor).
    base_jitter: Vec<f64>,
}

fn packed_sqdists(x: &Mat) -> Vec<f64> {
    let n = x.n_rows();
    let mut out = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for c in 0..x.n_cols() {
                let d = x[(i, c)] - x[(j, c)];
                acc += d * d;
            }
            out[i * (i + 1) / 2 + j] = acc;
        }
    }
    out
}

fn median_pairwise_distance(x: &Mat) -> f64 {
    let n = x.n_rows();
    let mut d = Vec::with_capacity(n.saturating_sub(1) * n / 2);
    for i in 0..n {
        for j in 0..i {
            let mut acc = 0.0;
            for c in 0..x.n_cols() {
                let diff = x[(i, c)] - x[(j, c)];
                acc += diff * diff;
            }
            d.push(math::sqrt(acc));
        }
    }
    d.retain(|v| *v > 0.0);
    if d.is_empty() {
        1.0
    } else {
        math::median(&mut d)
    }
}

impl GpModel {
    /// Builds a model with the documented initialization: zero posterior
    /// means, L = 0.1·I, unit kernel variance, median-distance lengthscale,
    /// N(0, 0.5²) mixing weights, log-noise at log(0.1·var(y)).
    pub fn init(config: &ModelConfig, dataset: &CensoredDataset, run_seed: u64) -> Result<Self> {
        config.validate()?;
        if dataset.n_outputs() != config.d_outputs {
            return Err(Error::ShapeMismatch {
                context: "dataset outputs vs config",
                expected: config.d_outputs,
                got: dataset.n_outputs(),
            });
        }
        let n = dataset.n_points();
        let layout = ParamLayout::build(config, n);
        let mut params = vec![0.0; layout.n_total];

        let log_len = math::ln(median_pairwise_distance(&dataset.x));
        for (fam_idx, fam) in layout.families.iter().enumerate() {
            for slot in &fam.kernels {
                params[slot.log_variance] = 0.0;
                params[slot.log_lengthscale] = log_len;
            }
            let mut rng = Xoshiro256::stream(run_seed, &[STREAM_INIT, fam_idx as u64]);
            for w in &fam.weights {
                if let WeightSlot::Trainable { start, rows, cols } = w {
                    for k in 0..rows * cols {
                        params[start + k] = 0.5 * rng.standard_normal();
                    }
                }
            }
            for slot in &fam.phi {
                for i in slot.log_diag.clone() {
                    params[i] = math::ln(0.1);
                }
            }
        }
        if let Some((kind, range)) = &layout.free_scalars {
            for (slot, idx) in range.clone().enumerate() {
                params[idx] = match kind {
                    FreeScalarKind::LogNoiseVariance => {
                        // pooled over outputs: the scalar is shared
                        let mut var_sum = 0.0;
                        for d in 0..config.d_outputs {
                            let mut mean = 0.0;
                            for i in 0..n {
                                mean += dataset.y[(i, d)];
                            }
                            mean /= n.max(1) as f64;
                            for i in 0..n {
                                let diff = dataset.y[(i, d)] - mean;
                                var_sum += diff * diff;
                            }
                        }
                        let var = var_sum / (n * config.d_outputs).max(1) as f64;
                        math::ln((0.1 * var).max(1e-4))
                    }
                    // method-of-moments dispersion: α ≈ (var − mean)/mean²,
                    // clamped to a sane range
                    FreeScalarKind::RawDispersion => {
                        let d = slot;
                        let mut mean = 0.0;
                        for i in 0..n {
                            mean += dataset.y[(i, d)];
                        }
                        mean /= n.max(1) as f64;
                        let mut var = 0.0;
                        for i in 0..n {
                            let diff = dataset.y[(i, d)] - mean;
                            var += diff * diff;
                        }
                        var /= n.max(1) as f64;
                        let alpha = if mean > 0.0 && var > mean {
                            ((var - mean) / (mean * mean)).clamp(0.05, 2.0)
                        } else {
                            0.3
                        };
                        // softplus⁻¹
                        math::ln(math::exp_m1(alpha))
                    }
                };
            }
        }
        // initial prior mean diagonal per family: Σ_q b_dd · var_q at x = x
        let mut base_jitter = Vec::with_capacity(layout.families.len());
        for fam in &layout.families {
            let mut diag_sum = 0.0;
            for (q, slot) in fam.kernels.iter().enumerate() {
                let var_q = math::exp(params[slot.log_variance]);
                let b_diag_sum: f64 = match &fam.weights[q] {
                    WeightSlot::FixedOne => 1.0,
                    WeightSlot::Trainable { start, rows, cols } => {
                        let mut acc = 0.0;
                        for d in 0..*rows {
                            for r in 0..*cols {
                                let a = params[start + d * cols + r];
                                acc += a * a;
                            }
                        }
                        acc / (*rows as f64).max(1.0)
                    }
                };
                diag_sum += var_q * b_diag_sum;
            }
            base_jitter.push(if diag_sum > 0.0 { 1e-4 * diag_sum } else { 1e-12 });
        }
        Ok(Self {
            config: config.clone(),
            layout,
            params,
            x: dataset.x.clone(),
            sqdists: packed_sqdists(&dataset.x),
            base_jitter,
        })
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_total
    }

    /// The fixed diagonal nugget added to one latent family's prior.
    pub fn prior_nugget(&self, family: usize) -> f64 {
        self.base_jitter[family]
    }

    /// Builds the packed lower prior covariance of one latent family on the
    /// tape, sharing per-kernel nodes across all entries.
    fn build_prior_packed<'t>(
        &self,
        _tape: &'t Tape,
        params: &[Var<'t>],
        fam_idx: usize,
    ) -> Vec<Var<'t>> {
        let fam = &self.layout.families[fam_idx];
        let n = self.layout.n_points;
        let d_out = self.layout.d_outputs;
        let m = n * d_out;
        let n_latents = fam.kernels.len();

        // per-kernel shared nodes and per-pair RBF values
        let mut rbf_packs: Vec<Vec<Var<'t>>> = Vec::with_capacity(n_latents);
        let mut b_blocks: Vec<Option<Vec<Var<'t>>>> = Vec::with_capacity(n_latents);
        for q in 0..n_latents {
            let lv = params[fam.kernels[q].log_variance];
            let ll = params[fam.kernels[q].log_lengthscale];
            let gamma = ll.mul_c(-2.0).exp();
            let pack: Vec<Var<'t>> =
                self.sqdists.iter().map(|&d2| rbf_pair(lv, gamma, d2)).collect();
            rbf_packs.push(pack);
            // coregionalization entries b_{d,d'} for d ≥ d'
            b_blocks.push(match &fam.weights[q] {
                WeightSlot::FixedOne => None,
                WeightSlot::Trainable { start, rows, cols } => {
                    let mut b = Vec::with_capacity(d_out * (d_out + 1) / 2);
                    for d in 0..*rows {
                        for dp in 0..=d {
                            let mut acc: Option<Var<'t>> = None;
                            for r in 0..*cols {
                                let term = params[start + d * cols + r]
                                    * params[start + dp * cols + r];
                                acc = Some(match acc {
                                    None => term,
                                    Some(a) => a + term,
                                });
                            }
                            b.push(acc.expect("rank ≥ 1"));
                        }
                    }
                    Some(b)
                }
            });
        }

        let mut packed: Vec<Option<Var<'t>>> = vec![None; m * (m + 1) / 2];
        for d in 0..d_out {
            for dp in 0..=d {
                for i in 0..n {
                    let rows = d * n + i;
                    let j_max = if d == dp { i } else { n - 1 };
                    for j in 0..=j_max {
                        let cols = dp * n + j;
                        let pair = if i >= j { i * (i + 1) / 2 + j } else { j * (j + 1) / 2 + i };
                        let mut entry: Option<Var<'t>> = None;
                        for q in 0..n_latents {
                            let k = rbf_packs[q][pair];
                            let term = match &b_blocks[q] {
                                None => k,
                                Some(b) => b[d * (d + 1) / 2 + dp] * k,
                            };
                            entry = Some(match entry {
                                None => term,
                                Some(e) => e + term,
                            });
                        }
                        packed[rows * (rows + 1) / 2 + cols] = entry;
                    }
                }
            }
        }
        packed.into_iter().map(|v| v.expect("covered")).collect()
    }

    /// Packed posterior Cholesky factor of one latent function as tape
    /// nodes (off-diagonals are raw parameters, diagonal is exponentiated).
    fn posterior_chol_vars<'t>(
        &self,
        params: &[Var<'t>],
        fam_idx: usize,
        output: usize,
    ) -> Vec<Var<'t>> {
        let slot = &self.layout.families[fam_idx].phi[output];
        let n = self.layout.n_points;
        let mut packed = Vec::with_capacity(n * (n + 1) / 2);
        let mut off = slot.off_diag.start;
        for i in 0..n {
            for _ in 0..i {
                packed.push(params[off]);
                off += 1;
            }
            packed.push(params[slot.log_diag.start + i].exp());
        }
        packed
    }

    /// Assembles the full objective on the tape.
    pub fn build_elbo<'t>(
        &self,
        tape: &'t Tape,
        params: &[Var<'t>],
        dataset: &CensoredDataset,
        noise: &NoiseDraws,
    ) -> Result<ElboParts<'t>> {
        let n = self.layout.n_points;
        let d_out = self.layout.d_outputs;
        let m = n * d_out;
        let n_families = self.layout.families.len();
        let s_count = noise.n_samples;
        let spec = &self.config.likelihood;

        // posterior factors, shared by the KL and the likelihood part
        let mut post_chols: Vec<Vec<Vec<Var<'t>>>> = Vec::with_capacity(n_families);
        for fam_idx in 0..n_families {
            post_chols.push(
                (0..d_out).map(|d| self.posterior_chol_vars(params, fam_idx, d)).collect(),
            );
        }

        // KL terms, one per latent family
        let mut kls: Vec<Var<'t>> = Vec::with_capacity(n_families);
        for fam_idx in 0..n_families {
            let fam = &self.layout.families[fam_idx];
            let prior_packed = self.build_prior_packed(tape, params, fam_idx);
            // fixed nugget: constant diagonal regularization decided at
            // initialization, so the objective does not shift under the
            // optimizer's feet
            let mut prior_packed = prior_packed;
            let nugget = self.base_jitter[fam_idx];
            for i in 0..m {
                let idx = i * (i + 1) / 2 + i;
                prior_packed[idx] = prior_packed[idx].add_c(nugget);
            }
            let matrix_name: &'static str =
                if fam.param_index == 0 { "prior covariance K_f" } else { "prior covariance K_g" };
            let l_k = tape.chol_packed(&prior_packed, m, nugget, matrix_name)?;

            // log det K = 2 Σ ln L_ii
            let diag_logs: Vec<Var<'t>> =
                (0..m).map(|i| l_k[i * (i + 1) / 2 + i].ln()).collect();
            let logdet_k = tape.sum(&diag_logs).mul_c(2.0);

            // μᵀ K⁻¹ μ via one forward solve
            let mu_stacked: Vec<Var<'t>> = (0..d_out)
                .flat_map(|d| fam.phi[d].mu.clone().map(|i| params[i]))
                .collect();
            let w = tape.tri_solve(&l_k, &mu_stacked, m, false);
            let quad = tape.dot(&w, &w);

            // tr(K⁻¹ Σ) = ‖L_K⁻¹ B‖_F² with B = blockdiag posterior factors
            let zero = tape.zero();
            let mut b_cols: Vec<Var<'t>> = vec![zero; m * m];
            for d in 0..d_out {
                let chol = &post_chols[fam_idx][d];
                for i in 0..n {
                    for j in 0..=i {
                        // column-major storage
                        b_cols[(d * n + j) * m + (d * n + i)] = chol[i * (i + 1) / 2 + j];
                    }
                }
            }
            let wmat = tape.tri_solve(&l_k, &b_cols, m, false);
            let trace = tape.dot(&wmat, &wmat);

            // log det Σ = 2 Σ log-diagonal parameters (they are the logs)
            let logdiag_params: Vec<Var<'t>> = (0..d_out)
                .flat_map(|d| fam.phi[d].log_diag.clone().map(|i| params[i]))
                .collect();
            let logdet_sigma = tape.sum(&logdiag_params).mul_c(2.0);

            let kl = (trace + quad + logdet_k - logdet_sigma).add_c(-(m as f64)).mul_c(0.5);
            kls.push(kl);
        }

        // Monte-Carlo expected log-likelihood
        let mut free_scalar_nodes: Vec<Var<'t>> = Vec::new();
        if let Some((kind, range)) = &self.layout.free_scalars {
            for idx in range.clone() {
                free_scalar_nodes.push(match kind {
                    FreeScalarKind::LogNoiseVariance => params[idx].exp(),
                    FreeScalarKind::RawDispersion => params[idx].softplus(),
                });
            }
        }

        let mut terms: Vec<Var<'t>> = Vec::with_capacity(s_count * n * d_out);
        let mut per_sample_loglik = vec![0.0; s_count];
        let mut negbin_clamps = 0usize;
        for s in 0..s_count {
            for d in 0..d_out {
                // latent draws for this (sample, output) across families
                let mut latents: Vec<Vec<Var<'t>>> = Vec::with_capacity(n_families);
                for fam_idx in 0..n_families {
                    let fam = &self.layout.families[fam_idx];
                    let mu_vars: Vec<Var<'t>> =
                        fam.phi[d].mu.clone().map(|i| params[i]).collect();
                    let eps = &noise.eps[fam_idx][d][s * n..(s + 1) * n];
                    latents.push(tape.affine_tri_mul(&post_chols[fam_idx][d], &mu_vars, eps));
                }
                for i in 0..n {
                    let mut linked: Vec<Var<'t>> = Vec::with_capacity(spec.family.param_count());
                    match spec.family {
                        Family::Gaussian | Family::NegativeBinomial => {
                            linked.push(link_apply(
                                self.layout.families[0].link,
                                latents[0][i],
                            ));
                            if self.config.heteroscedastic {
                                linked.push(link_apply(
                                    self.layout.families[1].link,
                                    latents[1][i],
                                ));
                            } else if spec.family == Family::Gaussian {
                                // one shared noise scalar
                                linked.push(free_scalar_nodes[0]);
                            } else {
                                linked.push(free_scalar_nodes[d]);
                            }
                        }
                        Family::Poisson => {
                            linked.push(link_apply(
                                self.layout.families[0].link,
                                latents[0][i],
                            ));
                        }
                    }
                    if spec.family == Family::NegativeBinomial && linked[1].val() < 1e-10 {
                        negbin_clamps += 1;
                    }
                    let censored = self.config.censored && dataset.is_censored(i, d);
                    let term = log_censored_generic(dataset.y[(i, d)], &linked, spec, censored)?;
                    if !term.val().is_finite() {
                        return Err(Error::NonFiniteElbo { index: i * d_out + d });
                    }
                    per_sample_loglik[s] += term.val();
                    terms.push(term);
                }
            }
        }
        let loglik_mean = if terms.is_empty() {
            tape.zero()
        } else {
            tape.sum(&terms).mul_c(1.0 / s_count as f64)
        };

        let mut elbo = loglik_mean;
        for kl in &kls {
            elbo = elbo - *kl;
        }
        if !elbo.value().is_finite() {
            return Err(Error::NonFiniteElbo { index: 0 });
        }
        Ok(ElboParts { elbo, kls, per_sample_loglik, negbin_clamps })
    }

    /// Value-only objective evaluation with fresh Monte-Carlo noise.
    pub fn elbo(
        &self,
        dataset: &CensoredDataset,
        rng_seed: u64,
        n_samples: usize,
    ) -> Result<ElboBreakdown> {
        let n_families = self.layout.families.len();
        let mut streams: Vec<Vec<Xoshiro256>> = (0..n_families)
            .map(|f| {
                (0..self.layout.d_outputs)
                    .map(|d| Xoshiro256::stream(rng_seed, &[STREAM_EPS, f as u64, d as u64]))
                    .collect()
            })
            .collect();
        let noise = NoiseDraws::draw(&mut streams, self.layout.n_points, n_samples);
        self.elbo_with_noise(dataset, &noise)
    }

    pub fn elbo_with_noise(
        &self,
        dataset: &CensoredDataset,
        noise: &NoiseDraws,
    ) -> Result<ElboBreakdown> {
        let tape = Tape::new();
        let vars = tape.params(&self.params);
        let parts = self.build_elbo(&tape, &vars, dataset, noise)?;
        let kl_per_family: Vec<f64> = parts.kls.iter().map(|v| v.value()).collect();
        let kl: f64 = kl_per_family.iter().sum();
        Ok(ElboBreakdown {
            elbo: parts.elbo.value(),
            expected_loglik: parts.elbo.value() + kl,
            kl,
            kl_per_family,
            per_sample_loglik: parts.per_sample_loglik,
            negbin_clamps: parts.negbin_clamps,
        })
    }
}

/// Draws μ + Lε from a packed lower Cholesky factor (plain values).
pub fn sample_reparam(mu: &[f64], l_packed: &[f64], rng: &mut Xoshiro256) -> Vec<f64> {
    let n = mu.len();
    debug_assert_eq!(l_packed.len(), n * (n + 1) / 2);
    let mut eps = vec![0.0; n];
    rng.fill_standard_normal(&mut eps);
    let mut out = mu.to_vec();
    for i in 0..n {
        let row0 = i * (i + 1) / 2;
        for k in 0..=i {
            out[i] += l_packed[row0 + k] * eps[k];
        }
    }
    out
}

/// Closed-form KL( N(μ, L Lᵀ) ‖ N(0, K) )
/// = ½ [ tr(K⁻¹Σ) + μᵀK⁻¹μ − N + log det K − log det Σ ].
pub fn kl_gaussian(q_mean: &[f64], q_chol: &Mat, prior_cov: &CovMatrix) -> Result<f64> {
    let n = prior_cov.dim();
    if q_mean.len() != n || q_chol.n_rows() != n || q_chol.n_cols() != n {
        return Err(Error::ShapeMismatch {
            context: "kl dimensions",
            expected: n,
            got: q_mean.len(),
        });
    }
    let factor = cholesky_with_jitter(
        &prior_cov.mat,
        default_base_jitter(&prior_cov.mat),
        "prior covariance",
    )?;
    let logdet_k = log_det_from_factor(&factor.l);
    let logdet_sigma: f64 = (0..n).map(|i| math::ln(q_chol[(i, i)])).sum::<f64>() * 2.0;
    let w = solve_lower(&factor.l, q_mean);
    let quad: f64 = w.iter().map(|v| v * v).sum();
    let wmat = solve_lower_mat(&factor.l, q_chol);
    let trace: f64 = wmat.data().iter().map(|v| v * v).sum();
    Ok(0.5 * (trace + quad - n as f64 + logdet_k - logdet_sigma))
}
