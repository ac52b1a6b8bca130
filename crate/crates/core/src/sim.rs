//! Synthetic data from MOGP priors and the three censoring protocols:
//! interval censoring over input regions, intensity censoring y = (1−c)·ỹ,
//! and probabilistic supply-proxy censoring for demand series.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::CensoredDataset;
use crate::error::{Error, Result};
use crate::kernels::LmcSpec;
use crate::likelihood::{link_apply, Family, LikelihoodSpec};
use crate::linalg::{cholesky_with_jitter, default_base_jitter, Mat};
use crate::math;
use crate::rng::Xoshiro256;

/// Censoring-overlap scenarios for the two-output synthetic study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapScenario {
    /// Output 1 censored on the central interval, output 2 untouched.
    None,
    /// Both outputs censored on disjoint index sets.
    Overlap0,
    /// The second region shares exactly half of the first one's indices.
    Overlap50,
    /// Full overlap, two discontinuous sub-intervals.
    Overlap100Mild,
    /// Full overlap, one contiguous central interval.
    Overlap100Hard,
}

/// Generator description for synthetic experiments.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub d_outputs: usize,
    /// Points per output (outputs share the equally spaced input set).
    pub n_points: usize,
    pub input_lo: f64,
    pub input_hi: f64,
    /// LMC prior over the mean latents.
    pub lmc_mean: LmcSpec,
    /// LMC prior over the log-variance (or second-parameter) latents.
    #[serde(default)]
    pub lmc_noise: Option<LmcSpec>,
    pub heteroscedastic: bool,
    /// Observation noise std for homoscedastic Gaussian generation.
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    /// Dispersion α for homoscedastic negative-binomial generation.
    #[serde(default = "default_dispersion")]
    pub dispersion: f64,
    /// Base observation family (censoring handled separately).
    pub likelihood: LikelihoodSpec,
    /// Constant added to the latent mean before the link, shifting data
    /// away from zero.
    #[serde(default)]
    pub mean_shift: f64,
    /// Constant added to the second-parameter latents before their link,
    /// controlling the generated noise floor.
    #[serde(default)]
    pub noise_shift: f64,
    /// Per-output lists of censoring intervals on the first input.
    #[serde(default)]
    pub censor_regions: Vec<Vec<(f64, f64)>>,
    #[serde(default)]
    pub overlap_scenario: Option<OverlapScenario>,
    pub seed: u64,
}

fn default_noise_std() -> f64 {
    0.3
}

fn default_dispersion() -> f64 {
    0.5
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d_outputs == 0 || self.n_points == 0 {
            return Err(Error::Config(String::from("need at least one output and point")));
        }
        if !(self.input_lo < self.input_hi) {
            return Err(Error::Config(String::from("input range must be nonempty")));
        }
        self.lmc_mean.validate(self.d_outputs)?;
        if self.heteroscedastic {
            match &self.lmc_noise {
                Some(l) => l.validate(self.d_outputs)?,
                None => {
                    return Err(Error::Config(String::from(
                        "heteroscedastic generation needs lmc_noise",
                    )))
                }
            }
        }
        if self.overlap_scenario.is_some() && self.d_outputs != 2 {
            return Err(Error::Config(String::from(
                "overlap scenarios are defined for exactly two outputs",
            )));
        }
        if !self.censor_regions.is_empty() && self.censor_regions.len() != self.d_outputs {
            return Err(Error::Config(String::from(
                "censor_regions must list one region set per output",
            )));
        }
        for regions in &self.censor_regions {
            for &(lo, hi) in regions {
                if !(lo <= hi) || lo < self.input_lo || hi > self.input_hi {
                    return Err(Error::Config(format!(
                        "censor region [{lo}, {hi}] outside input range"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Equally spaced inputs over the configured range, endpoints included.
    pub fn inputs(&self) -> Mat {
        let n = self.n_points;
        let mut x = Mat::zeros(n, 1);
        if n == 1 {
            x[(0, 0)] = self.input_lo;
            return x;
        }
        let step = (self.input_hi - self.input_lo) / (n - 1) as f64;
        for i in 0..n {
            x[(i, 0)] = self.input_lo + step * i as f64;
        }
        x
    }

    /// Censor regions implied by the overlap scenario, or the explicit ones.
    pub fn effective_regions(&self) -> Result<Vec<Vec<(f64, f64)>>> {
        if let Some(scenario) = self.overlap_scenario {
            let x = self.inputs();
            let xs: Vec<f64> = (0..self.n_points).map(|i| x[(i, 0)]).collect();
            Ok(scenario_regions(scenario, &xs, self.input_lo, self.input_hi).to_vec())
        } else {
            Ok(self.censor_regions.clone())
        }
    }
}

/// Indices of points falling inside any of the regions.
fn region_indices(xs: &[f64], regions: &[(f64, f64)]) -> Vec<usize> {
    xs.iter()
        .enumerate()
        .filter(|(_, &x)| regions.iter().any(|&(lo, hi)| x >= lo && x <= hi))
        .map(|(i, _)| i)
        .collect()
}

/// Interval from an inclusive index window, using midpoints between samples
/// so region membership is unambiguous.
fn indices_to_interval(xs: &[f64], first: usize, last: usize) -> (f64, f64) {
    let lo = if first == 0 { xs[0] } else { 0.5 * (xs[first - 1] + xs[first]) };
    let hi = if last + 1 >= xs.len() { xs[xs.len() - 1] } else { 0.5 * (xs[last] + xs[last + 1]) };
    (lo, hi)
}

/// Materializes the censor regions of an overlap scenario for two outputs.
///
/// The base region spans the central fractions 0.13–0.55 of the input range
/// (the interval [1.3, 5.5] on [0, 10]).
pub fn scenario_regions(
    scenario: OverlapScenario,
    xs: &[f64],
    lo: f64,
    hi: f64,
) -> [Vec<(f64, f64)>; 2] {
    let span = hi - lo;
    let frac = |a: f64, b: f64| (lo + a * span, lo + b * span);
    let base = frac(0.13, 0.55);
    match scenario {
        OverlapScenario::None => [vec![base], vec![]],
        OverlapScenario::Overlap0 => [vec![base], vec![frac(0.56, 0.98)]],
        OverlapScenario::Overlap50 => {
            // second window shifted so the shared index count is half of
            // the first window's, computed on the actual grid
            let c0 = region_indices(xs, &[base]);
            let last = *c0.last().expect("base region nonempty");
            let len = c0.len();
            let start1 = last + 1 - len / 2;
            let last1 = (start1 + len - 1).min(xs.len() - 1);
            [vec![base], vec![indices_to_interval(xs, start1, last1)]]
        }
        OverlapScenario::Overlap100Mild => {
            let shared = vec![frac(0.13, 0.30), frac(0.65, 0.80)];
            [shared.clone(), shared]
        }
        OverlapScenario::Overlap100Hard => {
            let shared = vec![frac(0.30, 0.70)];
            [shared.clone(), shared]
        }
    }
}

/// Draws one latent function stack (output-major, length N·D) from the LMC
/// construction: R_q i.i.d. draws of each latent kernel, mixed by A_q.
///
/// Sampling through the latent construction rather than the joint stacked
/// Cholesky keeps perfectly correlated outputs exactly identical.
fn sample_lmc_stack(x: &Mat, lmc: &LmcSpec, d_outputs: usize, rng: &mut Xoshiro256) -> Result<Vec<f64>> {
    let n = x.n_rows();
    let mut stack = vec![0.0; n * d_outputs];
    for (q, kernel) in lmc.kernels.iter().enumerate() {
        let mut gram = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let d2 = crate::kernels::sqdist(x.row(i), x.row(j))?;
                let v = kernel.eval_sqdist(d2);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let factor = cholesky_with_jitter(&gram, default_base_jitter(&gram), "latent kernel gram")?;
        let weights = &lmc.weights[q];
        let mut eta = vec![0.0; n];
        let mut u = vec![0.0; n];
        for r in 0..weights.n_cols() {
            rng.fill_standard_normal(&mut eta);
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..=i {
                    acc += factor.l[(i, k)] * eta[k];
                }
                u[i] = acc;
            }
            for d in 0..d_outputs {
                let a = weights[(d, r)];
                if a == 0.0 {
                    continue;
                }
                for i in 0..n {
                    stack[d * n + i] += a * u[i];
                }
            }
        }
    }
    Ok(stack)
}

/// Samples true outputs from the generative model: latent GPs through the
/// links, then one observation draw per point from the base distribution.
/// Censoring is not applied; `true_y` is filled and `y` equals it.
pub fn sample_mogp_prior(spec: &SyntheticSpec, rng: &mut Xoshiro256) -> Result<CensoredDataset> {
    spec.validate()?;
    sample_mogp_prior_at(spec.inputs(), spec, rng)
}

/// [`sample_mogp_prior`] over caller-supplied inputs (feature matrices,
/// irregular grids); the spec's input range is ignored.
pub fn sample_mogp_prior_at(
    x: Mat,
    spec: &SyntheticSpec,
    rng: &mut Xoshiro256,
) -> Result<CensoredDataset> {
    if x.n_rows() != spec.n_points {
        return Err(Error::ShapeMismatch {
            context: "generator inputs",
            expected: spec.n_points,
            got: x.n_rows(),
        });
    }
    let n = spec.n_points;
    let d_out = spec.d_outputs;

    let mean_stack = sample_lmc_stack(&x, &spec.lmc_mean, d_out, rng)?;
    let noise_stack = if spec.heteroscedastic {
        Some(sample_lmc_stack(&x, spec.lmc_noise.as_ref().expect("validated"), d_out, rng)?)
    } else {
        None
    };

    let links = &spec.likelihood.links;
    let mut y = Mat::zeros(n, d_out);
    for d in 0..d_out {
        for i in 0..n {
            let latent_mean = mean_stack[d * n + i] + spec.mean_shift;
            let value = match spec.likelihood.family {
                Family::Gaussian => {
                    let mean = link_apply(links[0], latent_mean);
                    let var = match &noise_stack {
                        Some(g) => link_apply(links[1], g[d * n + i] + spec.noise_shift),
                        None => spec.noise_std * spec.noise_std,
                    };
                    mean + math::sqrt(var) * rng.standard_normal()
                }
                Family::Poisson => {
                    let rate = link_apply(links[0], latent_mean);
                    rng.poisson(rate) as f64
                }
                Family::NegativeBinomial => {
                    let mu = link_apply(links[0], latent_mean);
                    let alpha = match &noise_stack {
                        Some(g) => link_apply(links[1], g[d * n + i] + spec.noise_shift),
                        None => spec.dispersion,
                    };
                    let alpha = alpha.max(1e-10);
                    let r = 1.0 / alpha;
                    let p = math::sigmoid(mu * alpha);
                    rng.negative_binomial(r, p) as f64
                }
            };
            y[(i, d)] = value;
        }
    }

    let mut ds = CensoredDataset::uncensored(x, y.clone());
    ds.true_y = Some(y);
    Ok(ds)
}

/// Right-censors points inside the given per-output input regions.
///
/// Thresholds track the data: within each region the threshold at a point
/// is the running minimum of the true values so far, pushed 25% of its
/// magnitude further down, so thresholds vary with x and never exceed the
/// true value.
pub fn apply_interval_censoring(
    dataset: &mut CensoredDataset,
    regions: &[Vec<(f64, f64)>],
) -> Result<()> {
    let true_y = dataset
        .true_y
        .clone()
        .ok_or_else(|| Error::Data(String::from("interval censoring needs true outputs")))?;
    if regions.len() != dataset.n_outputs() {
        return Err(Error::ShapeMismatch {
            context: "censor regions",
            expected: dataset.n_outputs(),
            got: regions.len(),
        });
    }
    let n = dataset.n_points();
    for d in 0..dataset.n_outputs() {
        for &(lo, hi) in &regions[d] {
            let mut running_min = f64::INFINITY;
            for i in 0..n {
                let x = dataset.x[(i, 0)];
                if x < lo || x > hi {
                    continue;
                }
                running_min = running_min.min(true_y[(i, d)]);
                let threshold = running_min - 0.25 * running_min.abs();
                dataset.y[(i, d)] = threshold;
                dataset.set_threshold(i, d, Some(threshold));
                dataset.set_censored(i, d, true);
            }
        }
    }
    dataset.validate()
}

/// Intensity censoring: flagged observations are scaled to y = (1−c)·ỹ and
/// marked censored at that value. Flags are per (point, output), row-major.
pub fn apply_intensity_censoring(
    dataset: &mut CensoredDataset,
    known_censored: &[bool],
    c: f64,
) -> Result<()> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::Config(format!("censoring intensity must lie in [0, 1), got {c}")));
    }
    let true_y = dataset
        .true_y
        .clone()
        .ok_or_else(|| Error::Data(String::from("intensity censoring needs true outputs")))?;
    let d_out = dataset.n_outputs();
    if known_censored.len() != dataset.n_points() * d_out {
        return Err(Error::ShapeMismatch {
            context: "censoring flags",
            expected: dataset.n_points() * d_out,
            got: known_censored.len(),
        });
    }
    for i in 0..dataset.n_points() {
        for d in 0..d_out {
            if !known_censored[i * d_out + d] {
                continue;
            }
            let t = true_y[(i, d)];
            if t < 0.0 {
                return Err(Error::Data(format!(
                    "intensity censoring needs nonnegative true values, got {t} at point {i}"
                )));
            }
            let y = (1.0 - c) * t;
            dataset.y[(i, d)] = y;
            dataset.set_threshold(i, d, Some(y));
            dataset.set_censored(i, d, true);
        }
    }
    dataset.validate()
}

/// Supply-proxy censoring decision and draw for one demand series.
///
/// A step t ≥ 1 is censored with probability
/// 1 − sigmoid(dropoffs[t−1] − pickups[t−1] + 5); censored observations are
/// drawn uniformly on [0, ỹ_t] (floored when counts are requested). Step 0
/// is never censored. Returns (flags, observed values).
pub fn supply_proxy_censor(
    pickups: &[f64],
    dropoffs: &[f64],
    integer_outputs: bool,
    rng: &mut Xoshiro256,
) -> Result<(Vec<bool>, Vec<f64>)> {
    if pickups.len() != dropoffs.len() {
        return Err(Error::ShapeMismatch {
            context: "supply proxy series",
            expected: pickups.len(),
            got: dropoffs.len(),
        });
    }
    if pickups.len() < 2 {
        return Err(Error::Data(String::from("supply proxy needs at least two steps")));
    }
    if pickups.iter().chain(dropoffs).any(|&v| v < 0.0) {
        return Err(Error::Data(String::from("supply proxy series must be nonnegative")));
    }
    let n = pickups.len();
    let mut flags = vec![false; n];
    let mut values = pickups.to_vec();
    for t in 1..n {
        let p_censor = 1.0 - math::sigmoid(dropoffs[t - 1] - pickups[t - 1] + 5.0);
        if rng.bernoulli(p_censor) {
            let mut y = rng.uniform_in(0.0, pickups[t]);
            if integer_outputs {
                y = libm::floor(y);
            }
            flags[t] = true;
            values[t] = y;
        }
    }
    Ok((flags, values))
}

/// Applies supply-proxy censoring to one output of a dataset.
pub fn apply_supply_proxy_censoring(
    dataset: &mut CensoredDataset,
    output: usize,
    dropoffs: &[f64],
    integer_outputs: bool,
    rng: &mut Xoshiro256,
) -> Result<()> {
    let true_y = dataset
        .true_y
        .clone()
        .ok_or_else(|| Error::Data(String::from("supply-proxy censoring needs true outputs")))?;
    let pickups: Vec<f64> = (0..dataset.n_points()).map(|i| true_y[(i, output)]).collect();
    let (flags, values) = supply_proxy_censor(&pickups, dropoffs, integer_outputs, rng)?;
    for i in 0..dataset.n_points() {
        if flags[i] {
            dataset.y[(i, output)] = values[i];
            dataset.set_threshold(i, output, Some(values[i]));
            dataset.set_censored(i, output, true);
        }
    }
    dataset.validate()
}

/// Full synthetic protocol: prior draw plus interval censoring from the
/// spec's regions or overlap scenario.
pub fn simulate(spec: &SyntheticSpec) -> Result<CensoredDataset> {
    let mut rng = Xoshiro256::stream(spec.seed, &[0x51]);
    let mut ds = sample_mogp_prior(spec, &mut rng)?;
    let regions = spec.effective_regions()?;
    if !regions.is_empty() {
        apply_interval_censoring(&mut ds, &regions)?;
    }
    Ok(ds)
}

/// Cyclic time features: for each period, a (sin, cos) column pair over
/// steps 0..n, plus an optional linear trend column scaled to [0, 1].
pub fn time_feature_matrix(n: usize, periods: &[f64], include_trend: bool) -> Mat {
    let n_cols = periods.len() * 2 + usize::from(include_trend);
    let mut out = Mat::zeros(n, n_cols);
    for i in 0..n {
        let mut c = 0;
        for &p in periods {
            let angle = 2.0 * core::f64::consts::PI * (i as f64) / p;
            out[(i, c)] = libm::sin(angle);
            out[(i, c + 1)] = libm::cos(angle);
            c += 2;
        }
        if include_trend {
            out[(i, c)] = i as f64 / (n.max(2) - 1) as f64;
        }
    }
    out
}
