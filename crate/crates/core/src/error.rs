use crate::extreme::ExtremeKind;

/// Errors reported by estimator construction and evaluation.
///
/// Every failure is a violated precondition or a refused numerical regime.
/// Nothing in this crate returns a silently degraded value.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Flip probabilities live in `[0, 1/2)`; `1/2` would erase the bit.
    #[error("flip probability must satisfy 0 <= q < 1/2, got {q}")]
    InvalidFlipProbability { q: f64 },

    /// Privacy budgets must be positive and finite.
    #[error("epsilon must be positive and finite, got {epsilon}")]
    InvalidEpsilon { epsilon: f64 },

    /// An estimate was requested from an accumulator that saw no bits.
    #[error("no observations ingested")]
    NoObservations,

    /// OR and AND accumulators cannot be merged with each other.
    #[error("cannot merge {left:?} accumulator with {right:?} accumulator")]
    KindMismatch { left: ExtremeKind, right: ExtremeKind },

    /// Paired slices (bits and their noise levels) must have equal length.
    #[error("length mismatch: {bits} bits vs {noises} noise parameters")]
    LengthMismatch { bits: usize, noises: usize },

    /// A sum over `n` bits must lie in `0..=n`.
    #[error("sum {sum} out of range for {n} bits")]
    SumOutOfRange { sum: usize, n: usize },

    /// The sum-transition path divides by `det = (1-2q)^n`; `q = 0` has a
    /// degenerate (identity) transition and is served by the direct path.
    #[error("sum-transition estimation requires 0 < q < 1/2, got q = {q}")]
    DegenerateTransition { q: f64 },

    /// Inverting the sum-transition matrix produced a residual too large to
    /// trust. The entries of the inverse grow like `((1-q)/(1-2q))^n`, so
    /// large `n` with `q` near `1/2` lands here by design.
    #[error(
        "transition matrix is numerically ill-conditioned at n = {n}, q = {q}: \
         max |P P^-1 - I| = {residual:.3e} exceeds {limit:.0e}"
    )]
    IllConditioned {
        n: usize,
        q: f64,
        residual: f64,
        limit: f64,
    },

    /// Dense materialization of the `2^n x 2^n` joint inverse is refused
    /// beyond a small cap; the factored form serves any `n`.
    #[error("dense joint inverse is capped at {max} bits, got {n}")]
    TooManyBitsForDense { n: usize, max: usize },

    /// Set sketches need a universe of at least one position.
    #[error("universe size must be at least 1")]
    EmptyUniverse,

    /// Set elements are labels in `1..=m`.
    #[error("element {element} outside universe 1..={m}")]
    ElementOutOfUniverse { element: usize, m: usize },

    /// Privatization consumes an exact sketch exactly once.
    #[error("sketch is already privatized")]
    AlreadyPrivatized,

    /// Union estimation only debiases sketches that went through
    /// randomized response.
    #[error("sketch is not privatized")]
    NotPrivatized,

    /// Sketches being combined must share one universe size.
    #[error("universe size mismatch: expected m = {expected}, got {found}")]
    UniverseMismatch { expected: usize, found: usize },

    /// A serialized sketch line failed to parse or validate.
    #[error("invalid sketch record: {0}")]
    SketchFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
