//! Set-union cardinality over bit-vector sketches.
//!
//! A set over a small universe `1..=m` is a dense length-m bit vector.
//! Each party privatizes its vector bitwise through randomized response
//! and the union size is estimated as the sum over positions of the
//! per-position OR estimate. Unbiasedness and variance additivity carry
//! over from the per-bit estimator because positions use independent
//! noise draws.
//!
//! The serialized form is one JSON object per sketch:
//!
//! ```text
//! {"m":12,"q":2.5000000000000000e-1,"privatized":true,"bits":"a50"}
//! ```
//!
//! `bits` is a lowercase hex string with position 1 in the most
//! significant bit of the first digit, zero-padded to `ceil(m/4)` digits.
//! `q` is `null` exactly when the sketch has not been privatized.
//! Round-trips are bit-exact.

use rand::Rng;

use crate::error::{Error, Result};
use crate::extreme::{variance_or, variance_upper_bound, ExtremeAccumulator, ExtremeKind};
use crate::noise::{apply_rr, NoiseParam, NoisyBit};

/// One party's bit-vector view of a set over the universe `1..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionSketch {
    m: usize,
    bits: Vec<bool>,
    noise: Option<NoiseParam>,
    privatized: bool,
}

impl UnionSketch {
    /// Universe size.
    pub fn m(&self) -> usize {
        self.m
    }

    /// The stored bit vector; exact membership bits before privatization,
    /// randomized-response outputs after.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// The noise level the bits went through, if privatized.
    pub fn noise(&self) -> Option<NoiseParam> {
        self.noise
    }

    pub fn is_privatized(&self) -> bool {
        self.privatized
    }

    /// Wraps bits that were already released through randomized response
    /// elsewhere (the usual deployment shape: parties send noisy vectors).
    pub fn from_observed(bits: Vec<bool>, noise: NoiseParam) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        Ok(Self {
            m: bits.len(),
            bits,
            noise: Some(noise),
            privatized: true,
        })
    }

    /// Serializes to the one-line JSON form.
    pub fn to_json_line(&self) -> String {
        let q = match self.noise {
            Some(noise) => format!("{:.16e}", noise.q()),
            None => "null".to_string(),
        };
        format!(
            "{{\"m\":{},\"q\":{},\"privatized\":{},\"bits\":\"{}\"}}",
            self.m,
            q,
            self.privatized,
            bits_to_hex(&self.bits)
        )
    }

    /// Parses and validates the one-line JSON form.
    pub fn from_json_line(line: &str) -> Result<Self> {
        let bad = |msg: &str| Error::SketchFormat(msg.to_string());
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| bad(&format!("not valid JSON: {e}")))?;
        let obj = value.as_object().ok_or_else(|| bad("not a JSON object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "m" | "q" | "privatized" | "bits") {
                return Err(bad(&format!("unknown field \"{key}\"")));
            }
        }

        let m = obj
            .get("m")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| bad("field \"m\" must be a nonnegative integer"))? as usize;
        if m == 0 {
            return Err(Error::EmptyUniverse);
        }
        let privatized = obj
            .get("privatized")
            .and_then(serde_json::Value::as_bool)
            .ok_or_else(|| bad("field \"privatized\" must be a boolean"))?;
        let q_value = obj.get("q").ok_or_else(|| bad("missing field \"q\""))?;
        let noise = if q_value.is_null() {
            None
        } else {
            let q = q_value
                .as_f64()
                .ok_or_else(|| bad("field \"q\" must be a number or null"))?;
            Some(NoiseParam::new(q)?)
        };
        match (privatized, noise.is_some()) {
            (true, false) => return Err(bad("privatized sketch must record its q")),
            (false, true) => return Err(bad("unprivatized sketch must have q null")),
            _ => {}
        }
        let hex = obj
            .get("bits")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| bad("field \"bits\" must be a string"))?;
        let bits = hex_to_bits(hex, m)?;
        Ok(Self {
            m,
            bits,
            noise,
            privatized,
        })
    }
}

fn bits_to_hex(bits: &[bool]) -> String {
    let digits = bits.len().div_ceil(4);
    let mut out = String::with_capacity(digits);
    for d in 0..digits {
        let mut v = 0u32;
        for offset in 0..4 {
            let idx = d * 4 + offset;
            if idx < bits.len() && bits[idx] {
                v |= 8 >> offset;
            }
        }
        out.push(char::from_digit(v, 16).expect("nibble in range"));
    }
    out
}

fn hex_to_bits(hex: &str, m: usize) -> Result<Vec<bool>> {
    let bad = |msg: String| Error::SketchFormat(msg);
    let expected = m.div_ceil(4);
    if hex.len() != expected {
        return Err(bad(format!(
            "bits string has {} hex digits, expected {expected} for m = {m}",
            hex.len()
        )));
    }
    let mut bits = vec![false; m];
    for (d, c) in hex.chars().enumerate() {
        if c.is_ascii_uppercase() {
            return Err(bad(format!("bits string must be lowercase hex, got '{c}'")));
        }
        let v = c
            .to_digit(16)
            .ok_or_else(|| bad(format!("invalid hex digit '{c}'")))?;
        for offset in 0..4 {
            let set = v & (8 >> offset) != 0;
            let idx = d * 4 + offset;
            if idx < m {
                bits[idx] = set;
            } else if set {
                return Err(bad(format!(
                    "padding bit {} beyond m = {m} is set",
                    idx + 1
                )));
            }
        }
    }
    Ok(bits)
}

/// Encodes a set as an exact (unprivatized) sketch: bit `i` is 1 iff `i`
/// is an element. Elements are labels in `1..=m`; duplicates are allowed.
pub fn encode_set(elements: &[usize], m: usize) -> Result<UnionSketch> {
    if m == 0 {
        return Err(Error::EmptyUniverse);
    }
    let mut bits = vec![false; m];
    for &e in elements {
        if e == 0 || e > m {
            return Err(Error::ElementOutOfUniverse { element: e, m });
        }
        bits[e - 1] = true;
    }
    Ok(UnionSketch {
        m,
        bits,
        noise: None,
        privatized: false,
    })
}

/// Passes every bit of an exact sketch through randomized response.
///
/// Privatizing twice is an error: composing two passes changes the
/// effective flip probability without updating the recorded `q`.
pub fn privatize_sketch<R: Rng + ?Sized>(
    sk: &UnionSketch,
    noise: NoiseParam,
    rng: &mut R,
) -> Result<UnionSketch> {
    if sk.privatized {
        return Err(Error::AlreadyPrivatized);
    }
    let bits = sk
        .bits
        .iter()
        .map(|&b| apply_rr(b, noise, rng).value)
        .collect();
    Ok(UnionSketch {
        m: sk.m,
        bits,
        noise: Some(noise),
        privatized: true,
    })
}

/// The union-cardinality estimate and its worst-case variance bound.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionEstimate {
    /// Unbiased estimate of the union size. May be non-integer and may
    /// fall outside `[0, m]`; clamping is a display concern.
    pub cardinality: f64,
    /// The per-position OR estimates; `cardinality` is exactly their sum.
    pub per_position_estimates: Vec<f64>,
    /// Sum over positions of the worst-case per-position variance.
    pub variance_bound: f64,
}

/// Estimates the union cardinality of the sets behind privatized
/// sketches: the sum over positions of the per-position OR estimate.
///
/// Sketches must share one universe size; noise levels may differ per
/// sketch.
pub fn estimate_union(sketches: &[UnionSketch]) -> Result<UnionEstimate> {
    let Some(first) = sketches.first() else {
        return Err(Error::NoObservations);
    };
    let m = first.m;
    let mut noises = Vec::with_capacity(sketches.len());
    for sk in sketches {
        if sk.m != m {
            return Err(Error::UniverseMismatch {
                expected: m,
                found: sk.m,
            });
        }
        match sk.noise {
            Some(noise) if sk.privatized => noises.push(noise),
            _ => return Err(Error::NotPrivatized),
        }
    }

    let per_position_ub = variance_upper_bound(&noises, ExtremeKind::Or)?;
    let mut per_position_estimates = Vec::with_capacity(m);
    let mut cardinality = 0.0;
    let mut variance_bound = 0.0;
    for i in 0..m {
        let mut acc = ExtremeAccumulator::or();
        for (sk, &noise) in sketches.iter().zip(&noises) {
            acc.ingest(NoisyBit {
                value: sk.bits[i],
                noise,
            });
        }
        let est = acc.estimate()?;
        per_position_estimates.push(est);
        cardinality += est;
        variance_bound += per_position_ub;
    }
    Ok(UnionEstimate {
        cardinality,
        per_position_estimates,
        variance_bound,
    })
}

/// Exact variance of the union-cardinality estimate when the true bit
/// matrix is known: the sum over positions of the per-position OR
/// variance. Test and simulation support; deployment code cannot know
/// the true bits.
pub fn true_variance(true_bit_rows: &[Vec<bool>], noises: &[NoiseParam]) -> Result<f64> {
    if true_bit_rows.is_empty() {
        return Err(Error::NoObservations);
    }
    if true_bit_rows.len() != noises.len() {
        return Err(Error::LengthMismatch {
            bits: true_bit_rows.len(),
            noises: noises.len(),
        });
    }
    let m = true_bit_rows[0].len();
    if m == 0 {
        return Err(Error::EmptyUniverse);
    }
    for row in true_bit_rows {
        if row.len() != m {
            return Err(Error::UniverseMismatch {
                expected: m,
                found: row.len(),
            });
        }
    }
    let mut total = 0.0;
    let mut column = vec![false; true_bit_rows.len()];
    for i in 0..m {
        for (j, row) in true_bit_rows.iter().enumerate() {
            column[j] = row[i];
        }
        total += variance_or(&column, noises)?.variance;
    }
    Ok(total)
}
