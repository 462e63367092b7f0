//! Reference estimators used to cross-check the streaming product form.
//!
//! Two independent routes to the same OR estimate:
//!
//! * the sum-transition route, which treats the noisy bit sum as a draw
//!   from an `(n+1) x (n+1)` transition matrix `P` between true and noisy
//!   sums (equal `q` only) and reads `1 - P^-1[0][observed sum]`;
//! * the joint-transition route, which factors the inverse of the
//!   `2^n x 2^n` per-sequence transition matrix into per-bit 2x2 inverses
//!   and reads the top-row entry selected by the observed sequence.
//!
//! Both agree with the streaming estimator on every input; the tests pin
//! that equivalence. These paths cost more than the streaming form and
//! exist as oracles, not as production estimators.

use crate::error::{Error, Result};
use crate::noise::{NoiseParam, NoisyBit};

/// Dense materialization of the joint inverse is refused above this many
/// bits; `2^12 x 2^12` doubles is already 134 MB.
pub const MAX_DENSE_KRONECKER_BITS: usize = 12;

/// Largest acceptable max-abs residual of `P P^-1 - I`. Inversions worse
/// than this return an error instead of a value.
pub const MAX_INVERSION_RESIDUAL: f64 = 1e-6;

/// Minimal row-major dense matrix, sized for `(n+1) <= 65` transition
/// kernels and capped joint inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from equal-length rows. Panics on ragged input; intended
    /// for literals in tests and small fixed kernels.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * out.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Kronecker product; `self`'s indices are the most significant.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// `max_ij |self[i][j] - I[i][j]|` for a square matrix.
    pub fn max_abs_residual_from_identity(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "residual needs a square matrix");
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.get(i, j) - target).abs());
            }
        }
        worst
    }

    /// Inverse by LU factorization with partial pivoting, solving one
    /// identity column at a time. Returns `None` on an exactly zero pivot.
    fn invert_partial_pivot(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "inverse needs a square matrix");
        let n = self.rows;
        let mut a = self.data.clone();
        let mut swaps: Vec<(usize, usize)> = Vec::new();

        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let cand = a[i * n + k].abs();
                if cand > best {
                    best = cand;
                    p = i;
                }
            }
            if a[p * n + k] == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                swaps.push((k, p));
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let m = a[i * n + k] / pivot;
                a[i * n + k] = m;
                for j in k + 1..n {
                    a[i * n + j] -= m * a[k * n + j];
                }
            }
        }

        let mut inv = Self::zeros(n, n);
        let mut x = vec![0.0; n];
        for c in 0..n {
            x.fill(0.0);
            x[c] = 1.0;
            for &(k, p) in &swaps {
                x.swap(k, p);
            }
            for i in 1..n {
                for j in 0..i {
                    x[i] -= a[i * n + j] * x[j];
                }
            }
            for i in (0..n).rev() {
                for j in i + 1..n {
                    x[i] -= a[i * n + j] * x[j];
                }
                x[i] /= a[i * n + i];
            }
            for (i, &xi) in x.iter().enumerate() {
                inv.set(i, c, xi);
            }
        }
        Some(inv)
    }
}

/// Distribution of the noisy bit sum given the true bit sum, for `n` bits
/// at one shared noise level.
///
/// Computed by convolving `n` two-point distributions: `true_sum` of them
/// keep a one with probability `1-q`, the rest produce a spurious one
/// with probability `q`. Entry `k` is `P(noisy sum = k | true sum)`.
pub fn build_sum_pmf(n: usize, true_sum: usize, noise: NoiseParam) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::NoObservations);
    }
    if noise.q() == 0.0 {
        return Err(Error::DegenerateTransition { q: noise.q() });
    }
    if true_sum > n {
        return Err(Error::SumOutOfRange { sum: true_sum, n });
    }
    let q = noise.q();
    let mut pmf = Vec::with_capacity(n + 1);
    pmf.push(1.0);
    for i in 0..n {
        let p = if i < true_sum { 1.0 - q } else { q };
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, w) in pmf.iter().enumerate() {
            next[k] += w * (1.0 - p);
            next[k + 1] += w * p;
        }
        pmf = next;
    }
    Ok(pmf)
}

/// The `(n+1) x (n+1)` transition matrix between true and noisy bit sums
/// at one shared noise level, with its inverse and the inversion residual.
///
/// Column `s` is the noisy-sum distribution given true sum `s`, so every
/// column sums to 1 and all entries lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    noise: NoiseParam,
    entries: DenseMatrix,
    inverse: DenseMatrix,
    residual: f64,
}

impl TransitionMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn noise(&self) -> NoiseParam {
        self.noise
    }

    /// The forward matrix `P`.
    pub fn entries(&self) -> &DenseMatrix {
        &self.entries
    }

    /// The computed `P^-1`.
    pub fn inverse(&self) -> &DenseMatrix {
        &self.inverse
    }

    /// `max |P P^-1 - I|` observed when the inverse was computed. Always
    /// at most [`MAX_INVERSION_RESIDUAL`]; worse inversions are refused.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Builds the sum-transition matrix and its inverse.
///
/// The inverse entries grow like `((1-q)/(1-2q))^n`, so for large `n` with
/// `q` near `1/2` the inversion loses all double-precision accuracy. When
/// the identity residual exceeds [`MAX_INVERSION_RESIDUAL`] this refuses
/// with [`Error::IllConditioned`] rather than returning garbage.
pub fn build_transition_matrix(n: usize, noise: NoiseParam) -> Result<TransitionMatrix> {
    if n == 0 {
        return Err(Error::NoObservations);
    }
    if noise.q() == 0.0 {
        return Err(Error::DegenerateTransition { q: noise.q() });
    }
    let mut entries = DenseMatrix::zeros(n + 1, n + 1);
    for s in 0..=n {
        let pmf = build_sum_pmf(n, s, noise)?;
        for (k, p) in pmf.iter().enumerate() {
            entries.set(k, s, *p);
        }
    }
    let ill = |residual: f64| Error::IllConditioned {
        n,
        q: noise.q(),
        residual,
        limit: MAX_INVERSION_RESIDUAL,
    };
    let inverse = entries
        .invert_partial_pivot()
        .ok_or_else(|| ill(f64::INFINITY))?;
    let residual = entries.matmul(&inverse).max_abs_residual_from_identity();
    if !residual.is_finite() || residual > MAX_INVERSION_RESIDUAL {
        return Err(ill(residual));
    }
    Ok(TransitionMatrix {
        n,
        noise,
        entries,
        inverse,
        residual,
    })
}

/// OR estimate from the noisy bit sum: `1 - P^-1[0][noisy_sum]`.
pub fn estimate_or_convolution(noisy_sum: usize, tm: &TransitionMatrix) -> Result<f64> {
    if noisy_sum > tm.n {
        return Err(Error::SumOutOfRange {
            sum: noisy_sum,
            n: tm.n,
        });
    }
    Ok(1.0 - tm.inverse.get(0, noisy_sum))
}

/// Per-bit factors of the top row of the inverse joint transition matrix.
///
/// For bit `i` the 2x2 inverse has top row
/// `((1-q_i)/(1-2q_i), -q_i/(1-2q_i))`; an observed sequence selects one
/// element per bit and the product is the corresponding top-row entry of
/// the full `2^n x 2^n` inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerInverseFactors {
    rows: Vec<(f64, f64)>,
}

impl KroneckerInverseFactors {
    pub fn new(noises: &[NoiseParam]) -> Result<Self> {
        if noises.is_empty() {
            return Err(Error::NoObservations);
        }
        let rows = noises
            .iter()
            .map(|noise| {
                let scale = noise.debias_scale();
                ((1.0 - noise.q()) / scale, -noise.q() / scale)
            })
            .collect();
        Ok(Self { rows })
    }

    /// `((1-q_i)/(1-2q_i), -q_i/(1-2q_i))` per bit.
    pub fn per_bit_inverse_rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    /// Top-row entry of the joint inverse selected by an observed
    /// sequence.
    ///
    /// The zero-selected factors are multiplied first, then the
    /// one-selected factors. Grouping by observed value makes the result
    /// exactly invariant under permutations when all noise levels are
    /// equal, which the sum-based route requires.
    pub fn top_row_entry(&self, observed: &[bool]) -> Result<f64> {
        if observed.len() != self.rows.len() {
            return Err(Error::LengthMismatch {
                bits: observed.len(),
                noises: self.rows.len(),
            });
        }
        let mut product = 1.0;
        for (row, &b) in self.rows.iter().zip(observed) {
            if !b {
                product *= row.0;
            }
        }
        for (row, &b) in self.rows.iter().zip(observed) {
            if b {
                product *= row.1;
            }
        }
        Ok(product)
    }
}

/// OR estimate via the factored joint-inverse top row: `1 - prod_i f_i`
/// with `f_i = (1-q_i)/(1-2q_i)` for an observed 0 and `-q_i/(1-2q_i)`
/// for an observed 1.
pub fn estimate_or_kronecker(bits: &[NoisyBit]) -> Result<f64> {
    let noises: Vec<NoiseParam> = bits.iter().map(|b| b.noise).collect();
    let observed: Vec<bool> = bits.iter().map(|b| b.value).collect();
    let factors = KroneckerInverseFactors::new(&noises)?;
    Ok(1.0 - factors.top_row_entry(&observed)?)
}

/// Full `2^n x 2^n` inverse joint transition matrix, the Kronecker
/// product of the per-bit 2x2 inverses with bit 1 most significant.
///
/// Exponential in `n`; capped at [`MAX_DENSE_KRONECKER_BITS`] bits. The
/// factored form in [`KroneckerInverseFactors`] serves any `n`.
pub fn materialize_kronecker_inverse(noises: &[NoiseParam]) -> Result<DenseMatrix> {
    if noises.is_empty() {
        return Err(Error::NoObservations);
    }
    if noises.len() > MAX_DENSE_KRONECKER_BITS {
        return Err(Error::TooManyBitsForDense {
            n: noises.len(),
            max: MAX_DENSE_KRONECKER_BITS,
        });
    }
    let mut out = DenseMatrix::identity(1);
    for noise in noises {
        let scale = noise.debias_scale();
        let a = (1.0 - noise.q()) / scale;
        let b = -noise.q() / scale;
        let per_bit = DenseMatrix::from_rows(&[vec![a, b], vec![b, a]]);
        out = out.kron(&per_bit);
    }
    Ok(out)
}
