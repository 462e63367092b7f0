use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrbit::{estimate_union, privatize_sketch, NoiseParam, UnionSketch};

use crate::out::{fmt17, open_input};
use crate::{CliError, OutputFormat};

/// Privatizes every sketch on the input, one JSON line per sketch, in
/// order, drawing all noise from one seeded stream.
pub fn cmd_privatize(
    input: &str,
    q: Option<f64>,
    epsilon: Option<f64>,
    seed: u64,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let noise = match (q, epsilon) {
        (Some(q), None) => NoiseParam::new(q)?,
        (None, Some(epsilon)) => NoiseParam::from_epsilon(epsilon)?,
        _ => {
            return Err(CliError::precondition(
                "exactly one of --q and --epsilon must be given",
            ))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reader = open_input(input)?;
    let mut line = String::new();
    let mut lineno = 0u64;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        lineno += 1;
        let sketch = UnionSketch::from_json_line(line.trim())
            .map_err(|e| CliError::from(e).at_line(lineno))?;
        let noisy = privatize_sketch(&sketch, noise, &mut rng)
            .map_err(|e| CliError::from(e).at_line(lineno))?;
        writeln!(out, "{}", noisy.to_json_line())?;
    }
    Ok(())
}

/// Reads privatized sketches and reports the union-cardinality estimate.
pub fn cmd_estimate_union(
    input: &str,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut reader = open_input(input)?;
    let mut sketches = Vec::new();
    let mut line = String::new();
    let mut lineno = 0u64;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        lineno += 1;
        sketches.push(
            UnionSketch::from_json_line(line.trim())
                .map_err(|e| CliError::from(e).at_line(lineno))?,
        );
    }
    let estimate = estimate_union(&sketches)?;
    let m = sketches[0].m();
    let clamped = estimate.cardinality.clamp(0.0, m as f64);
    match format {
        OutputFormat::Json => writeln!(
            out,
            "{{\"m\":{m},\"sketches\":{},\"cardinality\":{},\"clamped\":{},\"variance_bound\":{}}}",
            sketches.len(),
            fmt17(estimate.cardinality),
            fmt17(clamped),
            fmt17(estimate.variance_bound),
        )?,
        OutputFormat::Csv => {
            writeln!(out, "m,sketches,cardinality,clamped,variance_bound")?;
            writeln!(
                out,
                "{m},{},{},{},{}",
                sketches.len(),
                fmt17(estimate.cardinality),
                fmt17(clamped),
                fmt17(estimate.variance_bound),
            )?;
        }
    }
    Ok(())
}
