use std::io::Write;

use rrbit::{ExtremeAccumulator, ExtremeKind, NoiseParam, NoisyBit};

use crate::out::{fmt17, open_input};
use crate::{CliError, OutputFormat};

/// Single-pass estimate over a "bit,q" line stream. Memory stays constant
/// in the stream length: one accumulator plus one running product for the
/// variance bound.
pub fn cmd_estimate(
    kind: ExtremeKind,
    input: &str,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut reader = open_input(input)?;
    let mut acc = ExtremeAccumulator::new(kind);
    let mut bound_product = 1.0f64;
    let mut line = String::new();
    let mut lineno = 0u64;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        lineno += 1;
        let (value, noise) = parse_bit_line(line.trim())
            .map_err(|msg| CliError::parse(msg).at_line(lineno))?;
        acc.ingest(NoisyBit { value, noise });
        bound_product *= 1.0 + noise.variance_term();
    }

    let raw = acc.estimate()?;
    let clamped = raw.clamp(0.0, 1.0);
    let bound = bound_product - 1.0;
    let label = match kind {
        ExtremeKind::Or => "or",
        ExtremeKind::And => "and",
    };
    match format {
        OutputFormat::Json => writeln!(
            out,
            "{{\"kind\":\"{label}\",\"count\":{},\"raw\":{},\"clamped\":{},\"variance_upper_bound\":{}}}",
            acc.count(),
            fmt17(raw),
            fmt17(clamped),
            fmt17(bound),
        )?,
        OutputFormat::Csv => {
            writeln!(out, "kind,count,raw,clamped,variance_upper_bound")?;
            writeln!(
                out,
                "{label},{},{},{},{}",
                acc.count(),
                fmt17(raw),
                fmt17(clamped),
                fmt17(bound),
            )?;
        }
    }
    Ok(())
}

fn parse_bit_line(text: &str) -> Result<(bool, NoiseParam), String> {
    let Some((bit, q)) = text.split_once(',') else {
        return Err(format!("expected \"bit,q\", got \"{text}\""));
    };
    let value = match bit.trim() {
        "0" => false,
        "1" => true,
        other => return Err(format!("bit must be 0 or 1, got \"{other}\"")),
    };
    let q = q.trim();
    let q: f64 = q
        .parse()
        .map_err(|_| format!("cannot parse q \"{q}\" as a number"))?;
    let noise = NoiseParam::new(q).map_err(|e| e.to_string())?;
    Ok((value, noise))
}
