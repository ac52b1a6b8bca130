use crate::math;

use super::tape::{UnaryKind, Var};

/// Scalar abstraction over plain `f64` and tape variables.
///
/// Likelihood and link functions are written once against this trait; the
/// ELBO instantiates them with [`Var`] to get gradients, metric code
/// instantiates them with `f64`. Branch decisions inside generic code must
/// go through [`Real::val`] so both instantiations take the same path.
pub trait Real:
    Copy
    + core::ops::Add<Output = Self>
    + core::ops::Sub<Output = Self>
    + core::ops::Mul<Output = Self>
    + core::ops::Div<Output = Self>
    + core::ops::Neg<Output = Self>
{
    /// Primal value, for branching and diagnostics.
    fn val(self) -> f64;
    /// A constant in the same context (same tape for [`Var`]).
    fn lit(self, c: f64) -> Self;
    fn add_c(self, c: f64) -> Self;
    fn mul_c(self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn exp_m1(self) -> Self;
    fn sqrt(self) -> Self;
    fn softplus(self) -> Self;
    fn sigmoid(self) -> Self;
    fn ln_gamma(self) -> Self;
    /// log Φ(-self): log of the standard Gaussian survival function.
    fn log_norm_cdf_neg(self) -> Self;

    fn square(self) -> Self {
        self * self
    }

    fn recip(self) -> Self {
        self.lit(1.0) / self
    }
}

impl Real for f64 {
    #[inline]
    fn val(self) -> f64 {
        self
    }
    #[inline]
    fn lit(self, c: f64) -> f64 {
        c
    }
    #[inline]
    fn add_c(self, c: f64) -> f64 {
        self + c
    }
    #[inline]
    fn mul_c(self, c: f64) -> f64 {
        self * c
    }
    #[inline]
    fn exp(self) -> f64 {
        math::exp(self)
    }
    #[inline]
    fn ln(self) -> f64 {
        math::ln(self)
    }
    #[inline]
    fn ln_1p(self) -> f64 {
        math::ln_1p(self)
    }
    #[inline]
    fn exp_m1(self) -> f64 {
        math::exp_m1(self)
    }
    #[inline]
    fn sqrt(self) -> f64 {
        math::sqrt(self)
    }
    #[inline]
    fn softplus(self) -> f64 {
        math::softplus(self)
    }
    #[inline]
    fn sigmoid(self) -> f64 {
        math::sigmoid(self)
    }
    #[inline]
    fn ln_gamma(self) -> f64 {
        math::ln_gamma(self)
    }
    #[inline]
    fn log_norm_cdf_neg(self) -> f64 {
        math::log_norm_cdf_neg(self)
    }
}

impl<'t> Real for Var<'t> {
    fn val(self) -> f64 {
        self.value()
    }
    fn lit(self, c: f64) -> Self {
        self.tape().constant(c)
    }
    fn add_c(self, c: f64) -> Self {
        self.tape().add_const(self, c)
    }
    fn mul_c(self, c: f64) -> Self {
        self.tape().mul_const(self, c)
    }
    fn exp(self) -> Self {
        self.tape().unary(UnaryKind::Exp, self)
    }
    fn ln(self) -> Self {
        self.tape().unary(UnaryKind::Ln, self)
    }
    fn ln_1p(self) -> Self {
        self.tape().unary(UnaryKind::Ln1p, self)
    }
    fn exp_m1(self) -> Self {
        self.tape().unary(UnaryKind::ExpM1, self)
    }
    fn sqrt(self) -> Self {
        self.tape().unary(UnaryKind::Sqrt, self)
    }
    fn softplus(self) -> Self {
        self.tape().unary(UnaryKind::Softplus, self)
    }
    fn sigmoid(self) -> Self {
        self.tape().unary(UnaryKind::Sigmoid, self)
    }
    fn ln_gamma(self) -> Self {
        self.tape().unary(UnaryKind::LnGamma, self)
    }
    fn log_norm_cdf_neg(self) -> Self {
        self.tape().unary(UnaryKind::LogNormCdfNeg, self)
    }
}

/// Stable log Σ exp over tape-friendly scalars; the max is detached, which
/// leaves values and gradients exact.
pub fn logsumexp_real<S: Real>(xs: &[S]) -> S {
    debug_assert!(!xs.is_empty());
    let m = xs.iter().map(|x| x.val()).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return xs[0].lit(m);
    }
    let mut acc = xs[0].add_c(-m).exp();
    for x in &xs[1..] {
        acc = acc + x.add_c(-m).exp();
    }
    acc.ln().add_c(m)
}

/// log(1 - e^a) for a < 0, branch chosen on the primal value.
pub fn log1mexp_real<S: Real>(a: S) -> S {
    if a.val() > -math::FRAC_LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}
