//! Reverse-mode gradient tape.
//!
//! The tape records scalar primitives (arithmetic, exp/log/sqrt, softplus,
//! the Gaussian log-survival term, log-gamma) plus a handful of fat matrix
//! operations needed by the ELBO: packed Cholesky with jitter escalation,
//! triangular solves, dot products, sums and the reparameterization
//! transform μ + Lε. Fat operations carry custom pullbacks so the memory
//! cost stays O(N²) instead of taping every scalar of an O(N³) recurrence.
//!
//! One tape belongs to one training step; graphs are never shared between
//! threads. A backward pass visits every recorded operation exactly once,
//! in reverse order, so gradients are bitwise deterministic.

mod optim;
mod real;
mod tape;

pub use optim::{finite_diff_check, rmsprop_step, OptimizerState};
pub use real::{log1mexp_real, logsumexp_real, Real};
pub use tape::{Tape, Var};
