//! Scalar special functions with stable tails.
//!
//! Everything here is plain `f64`; the autodiff tape and the generic
//! likelihood code route their primal evaluations through these functions
//! so that the two paths cannot drift apart numerically.

pub const LN_2PI: f64 = 1.8378770664093453;
pub const SQRT_2: f64 = core::f64::consts::SQRT_2;
pub const FRAC_LN_2: f64 = core::f64::consts::LN_2;

/// Standardized-residual clamp for the Gaussian tail terms. Beyond this the
/// asymptotic expansion is used and gradients are held at the boundary value.
pub const GAUSS_TAIL_CLAMP: f64 = 38.0;

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

// Elementary transcendentals routed through libm so the gradient tape
// computes the same bits with and without the standard library.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// log Φ(-z) = log(1 - Φ(z)), the log of the Gaussian survival function,
/// finite and accurate for |z| ≤ [`GAUSS_TAIL_CLAMP`].
pub fn log_norm_cdf_neg(z: f64) -> f64 {
    let z = z.clamp(-GAUSS_TAIL_CLAMP, GAUSS_TAIL_CLAMP);
    if z <= 0.0 {
        // Φ(z) ≤ 1/2 here, so log1p is exact even when Φ(z) underflows the
        // distance to 1.
        let phi_z = 0.5 * erfc(-z / SQRT_2);
        return ln_1p(-phi_z);
    }
    if z <= 36.0 {
        // erfc keeps full relative accuracy until it underflows near 37.5
        ln(0.5 * erfc(z / SQRT_2))
    } else {
        // asymptotic series for the Mills ratio
        let zi = 1.0 / (z * z);
        let series = -zi + 3.0 * zi * zi - 15.0 * zi * zi * zi;
        -0.5 * z * z - 0.5 * LN_2PI - ln(z) + ln_1p(series)
    }
}

/// d/dz log Φ(-z) = -φ(z) / Φ(-z), evaluated in log space so the ratio
/// survives the deep tails.
pub fn log_norm_cdf_neg_derivative(z: f64) -> f64 {
    let z = z.clamp(-GAUSS_TAIL_CLAMP, GAUSS_TAIL_CLAMP);
    let log_pdf = -0.5 * z * z - 0.5 * LN_2PI;
    -exp(log_pdf - log_norm_cdf_neg(z))
}

/// Overflow-free log(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + ln_1p(exp(-x))
    } else {
        ln_1p(exp(x))
    }
}

/// Logistic function with a branch that never exponentiates a large value.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Digamma ψ(x) for x > 0: recurrence up to x ≥ 14, then the asymptotic
/// expansion. Absolute accuracy around 1e-12 over the range used here.
pub fn digamma(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < 14.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + ln(x) - 0.5 * inv
        - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)))
}

/// log(1 - e^a) for a < 0, split at -ln 2 per the usual recipe.
pub fn log1mexp(a: f64) -> f64 {
    if a >= 0.0 {
        return f64::NAN;
    }
    if a > -FRAC_LN_2 {
        ln(-exp_m1(a))
    } else {
        ln_1p(-exp(a))
    }
}

/// Stable log Σ exp(x_i); returns -inf on an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = xs.iter().map(|x| exp(x - m)).sum();
    m + ln(sum)
}

/// Median of a slice (averaging the middle pair for even lengths).
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
