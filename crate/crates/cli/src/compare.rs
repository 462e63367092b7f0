use std::io::Write;

use clap::ValueEnum;
use rrbit::{
    build_transition_matrix, estimate_or_convolution, estimate_or_kronecker,
    materialize_kronecker_inverse, ExtremeAccumulator, NoiseParam, NoisyBit,
};

use crate::out::fmt17;
use crate::{CliError, OutputFormat};

/// Largest tolerated relative gap between any two estimators.
pub const COMPARE_TOLERANCE: f64 = 1e-8;

/// Cap for the sum-transition path; beyond this the inverse is useless
/// at interesting noise levels anyway.
pub const MAX_SUM_MODE_BITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareMode {
    /// One row per observed noisy sum.
    Sums,
    /// One row per observed sequence, reading the materialized joint
    /// inverse instead of its factored form.
    Dense,
}

struct Row {
    label: String,
    elementary: f64,
    convolution: f64,
    kronecker: f64,
}

impl Row {
    fn max_abs_diff(&self) -> f64 {
        let (a, b, c) = (self.elementary, self.convolution, self.kronecker);
        (a - b).abs().max((a - c).abs()).max((b - c).abs())
    }

    fn rel_diff(&self) -> f64 {
        let scale = self
            .elementary
            .abs()
            .max(self.convolution.abs())
            .max(self.kronecker.abs())
            .max(1.0);
        self.max_abs_diff() / scale
    }
}

/// Streams one row per observed input, then fails with exit code 4 if any
/// relative disagreement exceeded [`COMPARE_TOLERANCE`].
pub fn cmd_compare(
    n: usize,
    q: f64,
    mode: CompareMode,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::precondition("n must be at least 1"));
    }
    let noise = NoiseParam::new(q)?;
    if mode == CompareMode::Sums && n > MAX_SUM_MODE_BITS {
        return Err(CliError::precondition(format!(
            "n = {n} exceeds the sum-mode cap of {MAX_SUM_MODE_BITS}"
        )));
    }
    let dense = match mode {
        CompareMode::Sums => None,
        CompareMode::Dense => Some(materialize_kronecker_inverse(&vec![noise; n])?),
    };
    let tm = build_transition_matrix(n, noise)?;

    let label_head = match mode {
        CompareMode::Sums => "noisy_sum",
        CompareMode::Dense => "sequence",
    };
    if format == OutputFormat::Csv {
        writeln!(
            out,
            "{label_head},elementary,convolution,kronecker,max_abs_diff"
        )?;
    }

    let mut worst_rel = 0.0f64;
    let mut emit = |out: &mut dyn Write, row: &Row| -> Result<(), CliError> {
        worst_rel = worst_rel.max(row.rel_diff());
        match format {
            OutputFormat::Csv => writeln!(
                out,
                "{},{},{},{},{}",
                row.label,
                fmt17(row.elementary),
                fmt17(row.convolution),
                fmt17(row.kronecker),
                fmt17(row.max_abs_diff()),
            )?,
            OutputFormat::Json => writeln!(
                out,
                "{{\"{label_head}\":{},\"elementary\":{},\"convolution\":{},\"kronecker\":{},\"max_abs_diff\":{}}}",
                if mode == CompareMode::Sums {
                    row.label.clone()
                } else {
                    format!("\"{}\"", row.label)
                },
                fmt17(row.elementary),
                fmt17(row.convolution),
                fmt17(row.kronecker),
                fmt17(row.max_abs_diff()),
            )?,
        }
        Ok(())
    };

    match mode {
        CompareMode::Sums => {
            for s in 0..=n {
                // Zeros before ones, matching the grouped factored product.
                let bits = observed_bits_for_sum(n, s, noise);
                let row = Row {
                    label: s.to_string(),
                    elementary: streaming_estimate(&bits),
                    convolution: estimate_or_convolution(s, &tm)?,
                    kronecker: estimate_or_kronecker(&bits)?,
                };
                emit(out, &row)?;
            }
        }
        CompareMode::Dense => {
            let dense = dense.expect("materialized above for dense mode");
            for idx in 0..1usize << n {
                let bits: Vec<NoisyBit> = (0..n)
                    .map(|i| NoisyBit {
                        value: idx >> (n - 1 - i) & 1 == 1,
                        noise,
                    })
                    .collect();
                let label: String = bits
                    .iter()
                    .map(|b| if b.value { '1' } else { '0' })
                    .collect();
                let s = bits.iter().filter(|b| b.value).count();
                let row = Row {
                    label,
                    elementary: streaming_estimate(&bits),
                    convolution: estimate_or_convolution(s, &tm)?,
                    kronecker: 1.0 - dense.get(0, idx),
                };
                emit(out, &row)?;
            }
        }
    }

    if worst_rel > COMPARE_TOLERANCE {
        return Err(CliError::tolerance(format!(
            "estimators disagree: worst relative difference {worst_rel:.3e} exceeds {COMPARE_TOLERANCE:.0e}"
        )));
    }
    Ok(())
}

fn observed_bits_for_sum(n: usize, s: usize, noise: NoiseParam) -> Vec<NoisyBit> {
    (0..n)
        .map(|i| NoisyBit {
            value: i >= n - s,
            noise,
        })
        .collect()
}

fn streaming_estimate(bits: &[NoisyBit]) -> f64 {
    let mut acc = ExtremeAccumulator::or();
    acc.ingest_all(bits.iter().copied());
    acc.estimate().expect("nonempty by construction")
}
