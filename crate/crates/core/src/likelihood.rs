//! Observation models: Gaussian, censored-Gaussian (Tobit), Poisson and
//! negative binomial, each with a censored variant built from the family's
//! survival term.
//!
//! Everything is generic over [`Real`], so the same formulas serve the
//! plain-float metric path and the gradient tape. All tail quantities are
//! computed in log space; no probability is ever materialized and then
//! logged.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{log1mexp_real, logsumexp_real, Real};
use crate::error::{Error, Result};
use crate::math;

/// Distribution family of one output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Poisson,
    NegativeBinomial,
}

impl Family {
    /// Number of latent parameters J defining the distribution.
    pub fn param_count(self) -> usize {
        match self {
            Family::Gaussian => 2,
            Family::Poisson => 1,
            Family::NegativeBinomial => 2,
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, Family::Poisson | Family::NegativeBinomial)
    }
}

/// Link functions mapping a latent GP value into a parameter's domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Exponential,
    Softplus,
}

/// Survival-term convention for discrete families: P(Y ≥ y) uses 1 − F(y−1),
/// the literal 1 − F(y) stays selectable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurvivalMode {
    StrictlyGreater,
    GreaterOrEqual,
}

/// Full observation-model description.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LikelihoodSpec {
    pub family: Family,
    /// Per-parameter links, length J.
    pub links: Vec<Link>,
    pub censored: bool,
    #[serde(default = "default_survival_mode")]
    pub discrete_survival_mode: SurvivalMode,
}

fn default_survival_mode() -> SurvivalMode {
    SurvivalMode::GreaterOrEqual
}

impl LikelihoodSpec {
    pub fn gaussian(censored: bool) -> Self {
        Self {
            family: Family::Gaussian,
            links: alloc::vec![Link::Identity, Link::Softplus],
            censored,
            discrete_survival_mode: default_survival_mode(),
        }
    }

    pub fn poisson(censored: bool) -> Self {
        Self {
            family: Family::Poisson,
            links: alloc::vec![Link::Softplus],
            censored,
            discrete_survival_mode: default_survival_mode(),
        }
    }

    pub fn negative_binomial(censored: bool) -> Self {
        Self {
            family: Family::NegativeBinomial,
            links: alloc::vec![Link::Softplus, Link::Softplus],
            censored,
            discrete_survival_mode: default_survival_mode(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.len() != self.family.param_count() {
            return Err(Error::Config(format!(
                "{:?} needs {} links, got {}",
                self.family,
                self.family.param_count(),
                self.links.len()
            )));
        }
        Ok(())
    }

    /// Checks one observation against the family's support.
    pub fn validate_observation(&self, y: f64) -> Result<()> {
        if self.family.is_discrete() && (y < 0.0 || libm::floor(y) != y) {
            return Err(Error::Domain(format!(
                "count family requires nonnegative integers, got {y}"
            )));
        }
        Ok(())
    }
}

/// Applies a link function.
pub fn link_apply<S: Real>(link: Link, raw: S) -> S {
    match link {
        Link::Identity => raw,
        Link::Exponential => raw.exp(),
        Link::Softplus => raw.softplus(),
    }
}

/// log(1 − Φ(z)) for the standardized residual z.
pub fn gaussian_log_cdf_complement<S: Real>(z: S) -> S {
    z.log_norm_cdf_neg()
}

/// Censored-Gaussian log-probability: the Gaussian log-density for observed
/// points, the log-survival term log(1 − Φ(y | f, var)) for censored ones.
pub fn log_censored_gaussian<S: Real>(y: f64, f: S, var: S, is_censored: bool) -> Result<S> {
    if !(var.val() > 0.0) {
        return Err(Error::Domain(format!("variance must be positive, got {}", var.val())));
    }
    if is_censored {
        let z = (-f).add_c(y) / var.sqrt();
        Ok(z.log_norm_cdf_neg())
    } else {
        let diff = f.add_c(-y);
        Ok((var.ln() + diff.square() / var).mul_c(-0.5).add_c(-0.5 * math::LN_2PI))
    }
}

/// Poisson log-PMF at count k for a positive rate.
pub fn poisson_log_pmf<S: Real>(k: f64, rate: S) -> S {
    rate.ln().mul_c(k) - rate + rate.lit(-math::ln_gamma(k + 1.0))
}

/// Negative-binomial log-PMF, P(X = k) = C(k+r−1, k) p^r (1−p)^k.
pub fn negbin_log_pmf<S: Real>(k: f64, r: S, p: S) -> S {
    let binom = r.add_c(k).ln_gamma() - r.ln_gamma() + r.lit(-math::ln_gamma(k + 1.0));
    binom + r * p.ln() + (-p).ln_1p().mul_c(k)
}

/// Outcome of mapping raw latents to negative-binomial parameters.
pub struct NegBinParams<S> {
    pub r: S,
    pub p: S,
    /// α was clamped away from zero; callers count these events.
    pub clamped: bool,
}

/// (r, p) from already-linked (μ, α): r = 1/α, p = sigmoid(μ·α), with α
/// clamped at 1e-10 to keep r finite.
pub fn negbin_params_from_linked<S: Real>(mu: S, alpha: S) -> NegBinParams<S> {
    let clamped = alpha.val() < 1e-10;
    let alpha = if clamped { alpha.lit(1e-10) } else { alpha };
    NegBinParams { r: alpha.recip(), p: (mu * alpha).sigmoid(), clamped }
}

/// (r, p) from raw latents through the configured links (α through
/// links[1], softplus by default).
pub fn negbin_params_from_latents<S: Real>(
    mu_latent: S,
    alpha_latent: S,
    links: &[Link],
) -> NegBinParams<S> {
    let mu = link_apply(links[0], mu_latent);
    let alpha = link_apply(links[1], alpha_latent);
    negbin_params_from_linked(mu, alpha)
}

/// Mean of the base distribution given linked parameters.
pub fn base_mean<S: Real>(params: &[S], family: Family) -> f64 {
    match family {
        Family::Gaussian => params[0].val(),
        Family::Poisson => params[0].val(),
        Family::NegativeBinomial => {
            let np = negbin_params_from_linked(params[0], params[1]);
            let (r, p) = (np.r.val(), np.p.val());
            r * (1.0 - p) / p
        }
    }
}

/// Variance of the base distribution given linked parameters.
pub fn base_variance<S: Real>(params: &[S], family: Family) -> f64 {
    match family {
        Family::Gaussian => params[1].val(),
        Family::Poisson => params[0].val(),
        Family::NegativeBinomial => {
            let np = negbin_params_from_linked(params[0], params[1]);
            let (r, p) = (np.r.val(), np.p.val());
            r * (1.0 - p) / (p * p)
        }
    }
}

/// log P(Y ≥ k_min) (or log P(Y > y) in strictly-greater mode) for a count
/// family, as a differentiable composition.
///
/// The smaller side of the distribution is summed: below the mean the CDF is
/// accumulated and complemented through log1mexp, above it the upper tail is
/// summed directly until the terms stop mattering.
fn count_log_survival<S: Real>(
    k_min: u64,
    mean: f64,
    mut log_pmf: impl FnMut(u64) -> S,
    anchor: S,
) -> S {
    if k_min == 0 {
        return anchor.lit(0.0);
    }
    if (k_min as f64) <= mean {
        // survival is the big side: complement the CDF below k_min
        let terms: Vec<S> = (0..k_min).map(&mut log_pmf).collect();
        let log_cdf = logsumexp_real(&terms);
        if log_cdf.val() >= 0.0 {
            // rounding pushed the CDF to one; survival mass is lost
            return anchor.lit(f64::NEG_INFINITY);
        }
        log1mexp_real(log_cdf)
    } else {
        // survival is the small side: sum the upper tail adaptively
        let mut terms: Vec<S> = Vec::new();
        let mut best = f64::NEG_INFINITY;
        let mut k = k_min;
        loop {
            let t = log_pmf(k);
            let tv = t.val();
            terms.push(t);
            if tv > best {
                best = tv;
            }
            let falling = (k as f64) > mean;
            if (falling && tv < best - 40.0) || k > k_min + 100_000 {
                break;
            }
            k += 1;
        }
        logsumexp_real(&terms)
    }
}

/// Generic censored log-probability: the family's log-density for observed
/// points, its log survival term for censored ones. `params` are the
/// already-linked distribution parameters (length J).
pub fn log_censored_generic<S: Real>(
    y: f64,
    params: &[S],
    spec: &LikelihoodSpec,
    is_censored: bool,
) -> Result<S> {
    spec.validate_observation(y)?;
    if params.len() != spec.family.param_count() {
        return Err(Error::ShapeMismatch {
            context: "likelihood parameters",
            expected: spec.family.param_count(),
            got: params.len(),
        });
    }
    match spec.family {
        Family::Gaussian => log_censored_gaussian(y, params[0], params[1], is_censored),
        Family::Poisson => {
            let rate = params[0];
            if !is_censored {
                return Ok(poisson_log_pmf(y, rate));
            }
            let k_min = match spec.discrete_survival_mode {
                SurvivalMode::GreaterOrEqual => y as u64,
                SurvivalMode::StrictlyGreater => y as u64 + 1,
            };
            let log_rate = rate.ln();
            Ok(count_log_survival(
                k_min,
                rate.val(),
                |k| log_rate.mul_c(k as f64) - rate + rate.lit(-math::ln_gamma(k as f64 + 1.0)),
                rate,
            ))
        }
        Family::NegativeBinomial => {
            let np = negbin_params_from_linked(params[0], params[1]);
            let (r, p) = (np.r, np.p);
            if !is_censored {
                return Ok(negbin_log_pmf(y, r, p));
            }
            let k_min = match spec.discrete_survival_mode {
                SurvivalMode::GreaterOrEqual => y as u64,
                SurvivalMode::StrictlyGreater => y as u64 + 1,
            };
            let mean = base_mean(params, Family::NegativeBinomial);
            let log_p = p.ln();
            let log_1mp = (-p).ln_1p();
            let lgamma_r = r.ln_gamma();
            Ok(count_log_survival(
                k_min,
                mean,
                |k| {
                    let kf = k as f64;
                    r.add_c(kf).ln_gamma() - lgamma_r + r.lit(-math::ln_gamma(kf + 1.0))
                        + r * log_p
                        + log_1mp.mul_c(kf)
                },
                r,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn links_behave() {
        assert!((link_apply(Link::Softplus, 0.0_f64) - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(link_apply(Link::Identity, -3.2_f64), -3.2);
        assert_eq!(link_apply(Link::Softplus, 800.0_f64), 800.0);
        assert!((link_apply(Link::Exponential, 1.0_f64) - core::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn gaussian_mode_log_density() {
        // y = f, var = 1: -ln√(2π)
        let v = log_censored_gaussian(1.3, 1.3_f64, 1.0, false).unwrap();
        assert!((v - (-0.9189385332046727)).abs() < 1e-15);
    }

    #[test]
    fn censored_at_the_mean_is_half() {
        let v = log_censored_gaussian(0.4, 0.4_f64, 2.7, true).unwrap();
        assert!((v - 0.5_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn censoring_far_below_the_mean_is_nearly_free() {
        // y = f - 5√var: survival ≈ Φ(5); frozen from the quadrature oracle
        let var = 1.9_f64;
        let f = 0.7;
        let y = f - 5.0 * var.sqrt();
        let v = log_censored_gaussian(y, f, var, true).unwrap();
        let expect = math::ln_1p(-0.5 * math::erfc(5.0 / math::SQRT_2));
        assert!((v - expect).abs() < 1e-18);
        assert!((v - (-2.866516129637636e-7)).abs() < 1e-18, "got {v}");
    }

    #[test]
    fn non_positive_variance_is_domain_error() {
        assert!(matches!(
            log_censored_gaussian(0.0, 0.0_f64, 0.0, false),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn poisson_pmf_values() {
        // P(0) = e^{-λ}
        let v = poisson_log_pmf(0.0, 3.7_f64);
        assert!((v - (-3.7)).abs() < 1e-14);
        // λ = y uses the factorial oracle
        let k = 6.0;
        let rate = 6.0_f64;
        let factorial: f64 = (1..=6).product::<u64>() as f64;
        let oracle = k * rate.ln() - rate - factorial.ln();
        assert!((poisson_log_pmf(k, rate) - oracle).abs() < 1e-12);
    }

    #[test]
    fn poisson_survival_at_zero_is_certain() {
        let spec = LikelihoodSpec::poisson(true);
        let v = log_censored_generic(0.0, &[2.5_f64], &spec, true).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn poisson_survival_matches_direct_sum() {
        let spec = LikelihoodSpec::poisson(true);
        for &(y, rate) in &[(3.0, 2.0_f64), (1.0, 8.0), (12.0, 4.0), (40.0, 10.0)] {
            let got = log_censored_generic(y, &[rate], &spec, true).unwrap();
            // oracle: P(Y ≥ y) by direct summation in extended range
            let mut tail = 0.0;
            for k in (y as u64)..(y as u64 + 500) {
                let kf = k as f64;
                tail += (kf * rate.ln() - rate - math::ln_gamma(kf + 1.0)).exp();
            }
            assert!(
                (got - tail.ln()).abs() < 1e-9 * tail.ln().abs().max(1.0),
                "y={y} rate={rate}: {got} vs {}",
                tail.ln()
            );
        }
    }

    #[test]
    fn poisson_strictly_greater_mode_shifts_the_sum() {
        let mut spec = LikelihoodSpec::poisson(true);
        spec.discrete_survival_mode = SurvivalMode::StrictlyGreater;
        let v_strict = log_censored_generic(3.0, &[2.0_f64], &spec, true).unwrap();
        spec.discrete_survival_mode = SurvivalMode::GreaterOrEqual;
        let v_ge = log_censored_generic(4.0, &[2.0_f64], &spec, true).unwrap();
        assert!((v_strict - v_ge).abs() < 1e-12);
    }

    #[test]
    fn negbin_pmf_example() {
        // k=3, r=2, p=0.5: C(4,3)·0.5^5 = 1/8
        let v = negbin_log_pmf(3.0, 2.0_f64, 0.5);
        assert!((v - 0.125_f64.ln()).abs() < 1e-12);
        assert!((v - (-2.0794415416798357)).abs() < 1e-12);
    }

    #[test]
    fn negbin_param_map() {
        // α = 1, μα = 0 → r = 1, p = 1/2
        let np = negbin_params_from_linked(0.0_f64, 1.0);
        assert!((np.r - 1.0).abs() < 1e-15);
        assert!((np.p - 0.5).abs() < 1e-15);
        assert!(!np.clamped);

        // α = 0.5, μα = ln 3 → r = 2, p = 3/4
        let mu = 3.0_f64.ln() / 0.5;
        let np = negbin_params_from_linked(mu, 0.5);
        assert!((np.r - 2.0).abs() < 1e-12);
        assert!((np.p - 0.75).abs() < 1e-12);

        // raw latents through softplus links, clamp path
        let np = negbin_params_from_latents(0.3_f64, -40.0, &[Link::Softplus, Link::Softplus]);
        assert!(np.clamped);
        assert!((np.r - 1e10).abs() < 1.0);
        assert!(np.p.is_finite() && np.r.is_finite());
    }

    #[test]
    fn negbin_survival_matches_direct_sum() {
        let spec = LikelihoodSpec::negative_binomial(true);
        // linked params (μ, α)
        for &(y, mu, alpha) in &[(2.0, 1.0_f64, 0.8_f64), (6.0, 0.4, 1.5), (1.0, 2.0, 0.2)] {
            let got = log_censored_generic(y, &[mu, alpha], &spec, true).unwrap();
            let np = negbin_params_from_linked(mu, alpha);
            let mut tail = 0.0;
            for k in (y as u64)..(y as u64 + 4000) {
                tail += negbin_log_pmf(k as f64, np.r, np.p).exp();
            }
            assert!(
                (got - tail.ln()).abs() < 1e-8 * tail.ln().abs().max(1.0),
                "y={y}: {got} vs {}",
                tail.ln()
            );
        }
    }

    #[test]
    fn count_families_reject_bad_observations() {
        let spec = LikelihoodSpec::poisson(false);
        assert!(matches!(
            log_censored_generic(-1.0, &[1.0_f64], &spec, false),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            log_censored_generic(2.5, &[1.0_f64], &spec, false),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn generic_gaussian_reproduces_censored_gaussian() {
        let spec = LikelihoodSpec::gaussian(true);
        for &(y, f, var, cen) in &[
            (0.3, 0.1_f64, 0.7_f64, false),
            (0.3, 0.1, 0.7, true),
            (-2.0, 1.0, 2.5, true),
            (4.0, -1.0, 0.2, false),
        ] {
            let a = log_censored_generic(y, &[f, var], &spec, cen).unwrap();
            let b = log_censored_gaussian(y, f, var, cen).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn censored_term_monotone_in_mean_and_variance() {
        // larger f helps a censored point; larger var helps when y > f
        let y = 1.0;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..60 {
            let f = -3.0 + 0.1 * i as f64;
            let v = log_censored_gaussian(y, f, 1.3_f64, true).unwrap();
            assert!(v > prev, "not increasing in f at {f}");
            prev = v;
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 1..60 {
            let var = 0.1 * i as f64;
            let v = log_censored_gaussian(y, 0.0_f64, var, true).unwrap();
            assert!(v > prev, "not increasing in var at {var}");
            prev = v;
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = LikelihoodSpec::gaussian(false);
        spec.validate().unwrap();
        spec.links.pop();
        assert!(spec.validate().is_err());
    }
}
