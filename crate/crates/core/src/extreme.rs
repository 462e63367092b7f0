//! Unbiased OR/AND estimation from noisy bits.
//!
//! Each hidden bit `x_i` is observed once through randomized response at
//! its own noise level `q_i`. The estimator keeps a single running product
//! of per-bit debiased factors:
//!
//! * OR:  factor `(1 - q - b) / (1 - 2q)`, estimate `1 - product`
//! * AND: factor `(b - q) / (1 - 2q)`, estimate `product`
//!
//! where `b` is the observed bit. The estimate is unbiased for
//! `max_i x_i` (OR) or `min_i x_i` (AND), runs online in constant space,
//! and shards merge by multiplying products.
//!
//! Estimates are not clamped to `[0, 1]`. Clamping would reintroduce bias
//! and break the additivity that union-cardinality estimation relies on;
//! presentation layers may clamp for display only.
//!
//! The exact variance over the noise draws, for true bits `x` and noise
//! terms `v_i = q_i(1-q_i)/(1-2q_i)^2`, is
//!
//! * OR:  `prod_i (1 - x_i + v_i) - [sum x_i = 0]`
//! * AND: `prod_i (x_i + v_i) - [sum x_i = n]`
//!
//! The running product grows like `((1-q)/(1-2q))^n` when every observed
//! bit disagrees with the extreme, so magnitudes can overflow for very
//! long high-noise streams; within the tested scales (n in the thousands,
//! q bounded away from 1/2) this is far from the f64 range.

use crate::error::{Error, Result};
use crate::noise::{NoiseParam, NoisyBit};

/// Which extreme of the hidden bits is being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremeKind {
    /// `max_i x_i`: is any hidden bit set?
    Or,
    /// `min_i x_i`: are all hidden bits set?
    And,
}

/// Constant-size streaming state for one OR or AND estimate.
///
/// The empty accumulator is the merge identity: `product = 1`, `count = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremeAccumulator {
    kind: ExtremeKind,
    product: f64,
    count: u64,
}

impl ExtremeAccumulator {
    /// Empty accumulator of the given kind.
    pub fn new(kind: ExtremeKind) -> Self {
        Self {
            kind,
            product: 1.0,
            count: 0,
        }
    }

    /// Empty OR accumulator.
    pub fn or() -> Self {
        Self::new(ExtremeKind::Or)
    }

    /// Empty AND accumulator.
    pub fn and() -> Self {
        Self::new(ExtremeKind::And)
    }

    pub fn kind(&self) -> ExtremeKind {
        self.kind
    }

    /// Number of bits ingested so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// The running product of debiased factors.
    pub fn product(&self) -> f64 {
        self.product
    }

    /// Folds one noisy bit into the running product. O(1) time and space.
    pub fn ingest(&mut self, bit: NoisyBit) {
        let q = bit.noise.q();
        let scale = bit.noise.debias_scale();
        let b = bit.value_f64();
        let factor = match self.kind {
            ExtremeKind::Or => (1.0 - q - b) / scale,
            ExtremeKind::And => (b - q) / scale,
        };
        self.product *= factor;
        self.count += 1;
    }

    /// Folds a sequence of noisy bits.
    pub fn ingest_all<I: IntoIterator<Item = NoisyBit>>(&mut self, bits: I) {
        for bit in bits {
            self.ingest(bit);
        }
    }

    /// Absorbs another accumulator of the same kind, as if its bits had
    /// been ingested here. Associative and commutative up to
    /// floating-point reordering.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.kind != other.kind {
            return Err(Error::KindMismatch {
                left: self.kind,
                right: other.kind,
            });
        }
        self.product *= other.product;
        self.count += other.count;
        Ok(())
    }

    /// The unbiased estimate of the extreme. May fall outside `[0, 1]`.
    ///
    /// The extreme of an empty sequence is deliberately an error rather
    /// than a default: OR over zero bits is a convention callers must
    /// choose explicitly.
    pub fn estimate(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::NoObservations);
        }
        Ok(match self.kind {
            ExtremeKind::Or => 1.0 - self.product,
            ExtremeKind::And => self.product,
        })
    }
}

/// Exact variance of an extreme estimate, with the per-bit noise terms
/// that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    /// Variance of the estimator over the randomized-response draws.
    pub variance: f64,
    /// `v_i = q_i(1-q_i)/(1-2q_i)^2` for each position.
    pub per_bit_noise_terms: Vec<f64>,
}

fn check_paired(true_bits: &[bool], noises: &[NoiseParam]) -> Result<()> {
    if true_bits.len() != noises.len() {
        return Err(Error::LengthMismatch {
            bits: true_bits.len(),
            noises: noises.len(),
        });
    }
    if true_bits.is_empty() {
        return Err(Error::NoObservations);
    }
    Ok(())
}

/// Exact variance of the OR estimate for known true bits:
/// `prod_i (1 - x_i + v_i)`, minus 1 when every true bit is 0.
///
/// True bits are unknown in deployment; this exists for simulation and
/// testing. Deployment code wants [`variance_upper_bound`].
pub fn variance_or(true_bits: &[bool], noises: &[NoiseParam]) -> Result<VarianceReport> {
    check_paired(true_bits, noises)?;
    let per_bit_noise_terms: Vec<f64> = noises.iter().map(|n| n.variance_term()).collect();
    let mut product = 1.0;
    let mut any_set = false;
    for (&x, v) in true_bits.iter().zip(&per_bit_noise_terms) {
        product *= if x { *v } else { 1.0 + *v };
        any_set |= x;
    }
    let variance = if any_set { product } else { product - 1.0 };
    Ok(VarianceReport {
        variance,
        per_bit_noise_terms,
    })
}

/// Exact variance of the AND estimate for known true bits:
/// `prod_i (x_i + v_i)`, minus 1 when every true bit is 1.
pub fn variance_and(true_bits: &[bool], noises: &[NoiseParam]) -> Result<VarianceReport> {
    check_paired(true_bits, noises)?;
    let per_bit_noise_terms: Vec<f64> = noises.iter().map(|n| n.variance_term()).collect();
    let mut product = 1.0;
    let mut all_set = true;
    for (&x, v) in true_bits.iter().zip(&per_bit_noise_terms) {
        product *= if x { 1.0 + *v } else { *v };
        all_set &= x;
    }
    let variance = if all_set { product - 1.0 } else { product };
    Ok(VarianceReport {
        variance,
        per_bit_noise_terms,
    })
}

/// Worst-case variance over all true-bit assignments:
/// `prod_i (1 + v_i) - 1`.
///
/// The worst case is the all-zero assignment for OR and the all-one
/// assignment for AND; both evaluate to the same bound.
pub fn variance_upper_bound(noises: &[NoiseParam], kind: ExtremeKind) -> Result<f64> {
    let worst = match kind {
        ExtremeKind::Or => vec![false; noises.len()],
        ExtremeKind::And => vec![true; noises.len()],
    };
    let report = match kind {
        ExtremeKind::Or => variance_or(&worst, noises)?,
        ExtremeKind::And => variance_and(&worst, noises)?,
    };
    Ok(report.variance)
}
