use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

use super::tape::{Tape, Var};

/// RMSprop state: running second moments per parameter.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub second_moment: Vec<f64>,
    pub skipped_steps: usize,
}

impl OptimizerState {
    /// Canonical constants: ρ = 0.9, ε = 1e-8.
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            decay: 0.9,
            epsilon: 1e-8,
            second_moment: vec![0.0; n_params],
            skipped_steps: 0,
        }
    }
}

/// One RMSprop update: v ← ρv + (1−ρ)g², p ← p − lr·g/(√v + ε).
///
/// Non-finite gradients reject the whole step, leaving parameters and
/// second moments untouched and bumping the skip counter.
pub fn rmsprop_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.second_moment.len() {
        return Err(Error::ShapeMismatch {
            context: "rmsprop step",
            expected: params.len(),
            got: grads.len(),
        });
    }
    if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
        state.skipped_steps += 1;
        return Err(Error::NonFiniteGradient { node: bad, op: "gradient input" });
    }
    let rho = state.decay;
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(state.second_moment.iter_mut()) {
        *v = rho * *v + (1.0 - rho) * g * g;
        *p -= state.learning_rate * g / (libm::sqrt(*v) + state.epsilon);
    }
    Ok(())
}

/// Compares tape gradients of `f` against central finite differences.
///
/// `f` is evaluated through the tape on every call, so the analytic and
/// numeric paths share one definition of the function. Returns the maximum
/// over coordinates of |g_ad − g_fd| / max(1, |g_fd|).
pub fn finite_diff_check<F>(f: F, point: &[f64], h: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars = tape.params(point);
    let out = f(&tape, &vars)?;
    let g_ad = tape.gradients(out)?;

    let eval = |p: &[f64]| -> Result<f64> {
        let t = Tape::new();
        let vs = t.params(p);
        Ok(f(&t, &vs)?.value())
    };

    let mut worst = 0.0_f64;
    let mut shifted = point.to_vec();
    for i in 0..point.len() {
        shifted[i] = point[i] + h;
        let up = eval(&shifted)?;
        shifted[i] = point[i] - h;
        let down = eval(&shifted)?;
        shifted[i] = point[i];
        let g_fd = (up - down) / (2.0 * h);
        let rel = (g_ad[i] - g_fd).abs() / g_fd.abs().max(1.0);
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}
