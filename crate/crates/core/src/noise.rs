//! Randomized response over single bits.
//!
//! A true bit `x` is released as a noisy bit that equals `x` with
//! probability `1 - q` and `1 - x` with probability `q`. The flip
//! probability `q` must lie in `[0, 1/2)`: at `q = 1/2` the output carries
//! no information about the input, and `q > 1/2` is the same mechanism with
//! the roles of the outputs swapped.

use rand::Rng;

use crate::error::{Error, Result};

/// A validated flip probability `q` in `[0, 1/2)`.
///
/// Every estimator in this crate takes noise levels through this type, so
/// range checks happen exactly once, at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParam {
    q: f64,
}

impl NoiseParam {
    /// Validates `0 <= q < 1/2`.
    pub fn new(q: f64) -> Result<Self> {
        if q.is_finite() && (0.0..0.5).contains(&q) {
            Ok(Self { q })
        } else {
            Err(Error::InvalidFlipProbability { q })
        }
    }

    /// The noiseless mechanism, `q = 0`.
    pub fn noiseless() -> Self {
        Self { q: 0.0 }
    }

    /// Flip probability for an `epsilon`-differentially-private release:
    /// `q = 1 / (e^epsilon + 1)`.
    ///
    /// Larger budgets mean less flipping; the result is always in
    /// `(0, 1/2)` for positive finite `epsilon`.
    pub fn from_epsilon(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::InvalidEpsilon { epsilon });
        }
        Self::new(1.0 / (epsilon.exp() + 1.0))
    }

    /// The flip probability `q`.
    pub fn q(self) -> f64 {
        self.q
    }

    /// `1 - 2q`, the factor by which randomized response shrinks the mean
    /// of a bit toward `1/2`. Positive for every valid `q`.
    pub fn debias_scale(self) -> f64 {
        1.0 - 2.0 * self.q
    }

    /// `v = q(1-q) / (1-2q)^2`, the variance a debiased bit contributes on
    /// top of its true value. Zero exactly when `q = 0`.
    pub fn variance_term(self) -> f64 {
        let s = self.debias_scale();
        self.q * (1.0 - self.q) / (s * s)
    }
}

/// One output of randomized response, tagged with the noise level that
/// produced it. Estimators need both to debias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyBit {
    pub value: bool,
    pub noise: NoiseParam,
}

impl NoisyBit {
    /// The observed value as `0.0` or `1.0`.
    pub fn value_f64(self) -> f64 {
        if self.value {
            1.0
        } else {
            0.0
        }
    }
}

/// Releases one bit through randomized response.
pub fn apply_rr<R: Rng + ?Sized>(bit: bool, noise: NoiseParam, rng: &mut R) -> NoisyBit {
    let flip = rng.gen_bool(noise.q());
    NoisyBit {
        value: bit != flip,
        noise,
    }
}

/// Releases a slice of bits independently, each at the same noise level.
pub fn apply_rr_vector<R: Rng + ?Sized>(
    bits: &[bool],
    noise: NoiseParam,
    rng: &mut R,
) -> Vec<NoisyBit> {
    bits.iter().map(|&b| apply_rr(b, noise, rng)).collect()
}
