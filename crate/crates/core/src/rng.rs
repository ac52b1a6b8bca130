//! Deterministic pseudo-random number generation.
//!
//! Reproducibility is a contract of this crate: the same seed must produce
//! bitwise-identical models and datasets on every run. To keep that promise
//! independent of external crate versions, the generator is implemented
//! here: xoshiro256++ seeded through SplitMix64, with normal variates from
//! the Marsaglia polar method.

#[cfg(not(feature = "std"))]
use num_traits::Float;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a tag path.
///
/// Used to give every training arm, fold, latent function and Monte-Carlo
/// stream its own generator without any cross-talk.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = base ^ 0x6a09_e667_f3bc_c909;
    let mut out = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(GOLDEN_GAMMA);
        out ^= splitmix64(&mut state).rotate_left(17);
    }
    out
}

/// xoshiro256++ generator with cached spare normal variate.
#[derive(Debug, Clone)]
pub struct Xoshiro256 {
    s: [u64; 4],
    spare_normal: Option<f64>,
}

impl Xoshiro256 {
    pub fn seed_from(seed: u64) -> Self {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for slot in s.iter_mut() {
            *slot = splitmix64(&mut sm);
        }
        // all-zero state is the one invalid state
        if s == [0, 0, 0, 0] {
            s[0] = GOLDEN_GAMMA;
        }
        Self { s, spare_normal: None }
    }

    /// Seeds a generator for the stream identified by `tags` under `base`.
    pub fn stream(base: u64, tags: &[u64]) -> Self {
        Self::seed_from(derive_seed(base, tags))
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` with 53 random mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Bernoulli draw with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal via the Marsaglia polar method.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let scale = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * scale);
                return u * scale;
            }
        }
    }

    /// Fills `out` with standard normal draws.
    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for slot in out.iter_mut() {
            *slot = self.standard_normal();
        }
    }

    /// Gamma(shape, scale) via Marsaglia–Tsang, shape > 0.
    pub fn gamma(&mut self, shape: f64, scale: f64) -> f64 {
        if shape < 1.0 {
            // boost: Gamma(a) = Gamma(a+1) * U^(1/a)
            let u = self.uniform().max(f64::MIN_POSITIVE);
            return self.gamma(shape + 1.0, scale) * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.standard_normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v3 = v * v * v;
            let u = self.uniform();
            if u < 1.0 - 0.0331 * (x * x) * (x * x) {
                return d * v3 * scale;
            }
            if u > 0.0 && u.ln() < 0.5 * x * x + d * (1.0 - v3 + v3.ln()) {
                return d * v3 * scale;
            }
        }
    }

    /// Poisson draw; Knuth's product method for small rates, a
    /// normal-approximation fallback above (rates here stay desk-scale).
    pub fn poisson(&mut self, rate: f64) -> u64 {
        if rate <= 0.0 {
            return 0;
        }
        if rate < 60.0 {
            let limit = (-rate).exp();
            let mut k = 0u64;
            let mut prod = self.uniform();
            while prod > limit {
                k += 1;
                prod *= self.uniform();
            }
            k
        } else {
            let z = self.standard_normal();
            let v = rate + rate.sqrt() * z;
            if v < 0.0 {
                0
            } else {
                v.round() as u64
            }
        }
    }

    /// Negative binomial with `r` failures and success probability `p`,
    /// counting successes `k`: `P(K = k) = C(k+r-1, k) p^r (1-p)^k`.
    /// Drawn as a gamma–Poisson mixture.
    pub fn negative_binomial(&mut self, r: f64, p: f64) -> u64 {
        let lambda = self.gamma(r, (1.0 - p) / p);
        self.poisson(lambda)
    }
}
