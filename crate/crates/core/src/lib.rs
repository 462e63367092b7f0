//! Estimation of boolean aggregates from bits observed through
//! randomized response.
//!
//! Each hidden bit is released once through a randomizer that flips it
//! with probability `q < 1/2`. This crate recovers unbiased estimates of
//! the OR (equivalently `max`) and AND (`min`) of the hidden bits from
//! those noisy observations, in one pass and constant space, along with
//! the exact variance of the estimate. Summing per-position OR estimates
//! over bit-vector set sketches turns the same machinery into an unbiased
//! set-union cardinality estimator.
//!
//! # Layout
//!
//! * [`noise`]: the randomized-response mechanism and validated noise
//!   parameters.
//! * [`extreme`]: the streaming OR/AND estimator, mergeable across
//!   shards, with exact variance and a worst-case bound.
//! * [`reference`]: two slower estimators (sum-transition inverse and
//!   factored joint-transition inverse) that provably agree with the
//!   streaming form; used as cross-checking oracles.
//! * [`sketch`]: dense bit-vector set sketches, their privatization,
//!   serialization, and union-cardinality estimation.
//!
//! # Example
//!
//! ```
//! use rand::SeedableRng;
//! use rrbit::{apply_rr, ExtremeAccumulator, NoiseParam};
//!
//! let noise = NoiseParam::new(0.25)?;
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let hidden = [false, true, false, false];
//!
//! let mut acc = ExtremeAccumulator::or();
//! for &bit in &hidden {
//!     acc.ingest(apply_rr(bit, noise, &mut rng));
//! }
//! // Unbiased over the noise draws; a single draw can leave [0, 1].
//! let estimate = acc.estimate()?;
//! assert!(estimate.is_finite());
//! # Ok::<(), rrbit::Error>(())
//! ```

pub mod error;
pub mod extreme;
pub mod noise;
pub mod reference;
pub mod sketch;

pub use error::{Error, Result};
pub use extreme::{
    variance_and, variance_or, variance_upper_bound, ExtremeAccumulator, ExtremeKind,
    VarianceReport,
};
pub use noise::{apply_rr, apply_rr_vector, NoiseParam, NoisyBit};
pub use reference::{
    build_sum_pmf, build_transition_matrix, estimate_or_convolution, estimate_or_kronecker,
    materialize_kronecker_inverse, DenseMatrix, KroneckerInverseFactors, TransitionMatrix,
    MAX_DENSE_KRONECKER_BITS, MAX_INVERSION_RESIDUAL,
};
pub use sketch::{
    encode_set, estimate_union, privatize_sketch, true_variance, UnionEstimate, UnionSketch,
};
