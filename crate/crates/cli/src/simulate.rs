use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use rrbit::{
    apply_rr, encode_set, estimate_union, privatize_sketch, true_variance, variance_or,
    ExtremeAccumulator, NoiseParam, UnionSketch,
};

use crate::out::{fmt17, open_input};
use crate::{CliError, OutputFormat};

/// Flat JSON experiment description.
///
/// `q` is one number shared by every bit or party, or a per-party list.
/// `true_bits` (0/1 entries) drives the or-bits scenario; `m` plus `sets`
/// (1-based element lists) drives the union scenario. `seed` falls back
/// to the --seed flag when absent.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    scenario: String,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    m: Option<usize>,
    q: QSpec,
    #[serde(default)]
    true_bits: Option<Vec<u8>>,
    #[serde(default)]
    sets: Option<Vec<Vec<usize>>>,
    trials: u64,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum QSpec {
    One(f64),
    Many(Vec<f64>),
}

impl QSpec {
    fn expand(&self, count: usize) -> Result<Vec<NoiseParam>, CliError> {
        let qs: Vec<f64> = match self {
            QSpec::One(q) => vec![*q; count],
            QSpec::Many(list) => {
                if list.len() != count {
                    return Err(CliError::precondition(format!(
                        "q list has {} entries, expected {count}",
                        list.len()
                    )));
                }
                list.clone()
            }
        };
        qs.into_iter()
            .map(|q| NoiseParam::new(q).map_err(CliError::from))
            .collect()
    }
}

/// Runs `trials` independent replications, each on its own substream
/// seeded with `seed ^ trial_index`, and reports empirical versus
/// theoretical moments (or the per-trial estimates with --per-trial).
pub fn cmd_simulate(
    config: &str,
    flag_seed: u64,
    per_trial: bool,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut text = String::new();
    open_input(config)?.read_to_string(&mut text)?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::parse(format!("config: {e}")))?;
    if cfg.trials == 0 {
        return Err(CliError::precondition("trials must be at least 1"));
    }
    let seed = cfg.seed.unwrap_or(flag_seed);

    let experiment = match cfg.scenario.as_str() {
        "or-bits" => prepare_or_bits(&cfg)?,
        "union" => prepare_union(&cfg)?,
        other => {
            return Err(CliError::precondition(format!(
                "unknown scenario \"{other}\"; expected \"or-bits\" or \"union\""
            )))
        }
    };

    let mut estimates = Vec::with_capacity(cfg.trials as usize);
    for trial in 0..cfg.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ trial);
        estimates.push(experiment.run_trial(&mut rng)?);
    }

    if per_trial {
        if format == OutputFormat::Csv {
            writeln!(out, "trial,estimate")?;
        }
        for (trial, estimate) in estimates.iter().enumerate() {
            match format {
                OutputFormat::Csv => writeln!(out, "{trial},{}", fmt17(*estimate))?,
                OutputFormat::Json => {
                    writeln!(out, "{{\"trial\":{trial},\"estimate\":{}}}", fmt17(*estimate))?
                }
            }
        }
        return Ok(());
    }

    let stats = Moments::of(&estimates);
    // Standard errors: the mean from the known theoretical variance, the
    // sample variance from the plug-in fourth-moment formula. A zero
    // standard error (noise-free runs) reports z = 0.
    let se_mean = (experiment.variance() / cfg.trials as f64).sqrt();
    let mean_z = zscore(stats.mean - experiment.mean(), se_mean);
    let n = cfg.trials as f64;
    let se_var = if cfg.trials > 1 {
        ((stats.m4 - stats.m2 * stats.m2 * (n - 3.0) / (n - 1.0)).max(0.0) / n).sqrt()
    } else {
        0.0
    };
    let variance_z = zscore(stats.sample_variance - experiment.variance(), se_var);

    match format {
        OutputFormat::Csv => {
            writeln!(
                out,
                "scenario,trials,seed,empirical_mean,empirical_variance,theoretical_mean,theoretical_variance,mean_z,variance_z"
            )?;
            writeln!(
                out,
                "{},{},{seed},{},{},{},{},{},{}",
                cfg.scenario,
                cfg.trials,
                fmt17(stats.mean),
                fmt17(stats.sample_variance),
                fmt17(experiment.mean()),
                fmt17(experiment.variance()),
                fmt17(mean_z),
                fmt17(variance_z),
            )?;
        }
        OutputFormat::Json => writeln!(
            out,
            "{{\"scenario\":\"{}\",\"trials\":{},\"seed\":{seed},\"empirical_mean\":{},\"empirical_variance\":{},\"theoretical_mean\":{},\"theoretical_variance\":{},\"mean_z\":{},\"variance_z\":{}}}",
            cfg.scenario,
            cfg.trials,
            fmt17(stats.mean),
            fmt17(stats.sample_variance),
            fmt17(experiment.mean()),
            fmt17(experiment.variance()),
            fmt17(mean_z),
            fmt17(variance_z),
        )?,
    }
    Ok(())
}

fn zscore(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else {
        0.0
    }
}

enum Experiment {
    OrBits {
        bits: Vec<bool>,
        noises: Vec<NoiseParam>,
        mean: f64,
        variance: f64,
    },
    Union {
        exact: Vec<UnionSketch>,
        noises: Vec<NoiseParam>,
        mean: f64,
        variance: f64,
    },
}

impl Experiment {
    fn run_trial(&self, rng: &mut ChaCha8Rng) -> Result<f64, CliError> {
        match self {
            Experiment::OrBits { bits, noises, .. } => {
                let mut acc = ExtremeAccumulator::or();
                for (&bit, &noise) in bits.iter().zip(noises) {
                    acc.ingest(apply_rr(bit, noise, rng));
                }
                Ok(acc.estimate()?)
            }
            Experiment::Union { exact, noises, .. } => {
                let sketches: Result<Vec<UnionSketch>, rrbit::Error> = exact
                    .iter()
                    .zip(noises)
                    .map(|(sk, &noise)| privatize_sketch(sk, noise, rng))
                    .collect();
                Ok(estimate_union(&sketches?)?.cardinality)
            }
        }
    }
}

impl Experiment {
    fn mean(&self) -> f64 {
        match self {
            Experiment::OrBits { mean, .. } | Experiment::Union { mean, .. } => *mean,
        }
    }

    fn variance(&self) -> f64 {
        match self {
            Experiment::OrBits { variance, .. } | Experiment::Union { variance, .. } => *variance,
        }
    }
}

fn prepare_or_bits(cfg: &ExperimentConfig) -> Result<Experiment, CliError> {
    let raw = cfg
        .true_bits
        .as_ref()
        .ok_or_else(|| CliError::precondition("or-bits scenario requires true_bits"))?;
    if raw.is_empty() {
        return Err(CliError::precondition("true_bits must be nonempty"));
    }
    let bits: Vec<bool> = raw
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(CliError::precondition(format!(
                "true_bits entries must be 0 or 1, got {other}"
            ))),
        })
        .collect::<Result<_, _>>()?;
    if let Some(n) = cfg.n {
        if n != bits.len() {
            return Err(CliError::precondition(format!(
                "n = {n} but true_bits has {} entries",
                bits.len()
            )));
        }
    }
    if cfg.m.is_some() || cfg.sets.is_some() {
        return Err(CliError::precondition(
            "or-bits scenario does not take m or sets",
        ));
    }
    let noises = cfg.q.expand(bits.len())?;
    let mean = bits.iter().any(|&b| b) as u8 as f64;
    let variance = variance_or(&bits, &noises)?.variance;
    Ok(Experiment::OrBits {
        bits,
        noises,
        mean,
        variance,
    })
}

fn prepare_union(cfg: &ExperimentConfig) -> Result<Experiment, CliError> {
    let m = cfg
        .m
        .ok_or_else(|| CliError::precondition("union scenario requires m"))?;
    let sets = cfg
        .sets
        .as_ref()
        .ok_or_else(|| CliError::precondition("union scenario requires sets"))?;
    if sets.is_empty() {
        return Err(CliError::precondition("sets must be nonempty"));
    }
    if let Some(n) = cfg.n {
        if n != sets.len() {
            return Err(CliError::precondition(format!(
                "n = {n} but sets has {} entries",
                sets.len()
            )));
        }
    }
    if cfg.true_bits.is_some() {
        return Err(CliError::precondition(
            "union scenario does not take true_bits",
        ));
    }
    let noises = cfg.q.expand(sets.len())?;
    let exact: Vec<UnionSketch> = sets
        .iter()
        .map(|set| encode_set(set, m).map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let rows: Vec<Vec<bool>> = exact.iter().map(|sk| sk.bits().to_vec()).collect();
    let union_size = (0..m).filter(|&i| rows.iter().any(|r| r[i])).count();
    let variance = true_variance(&rows, &noises)?;
    Ok(Experiment::Union {
        exact,
        noises,
        mean: union_size as f64,
        variance,
    })
}

struct Moments {
    mean: f64,
    sample_variance: f64,
    m2: f64,
    m4: f64,
}

impl Moments {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mut m2 = 0.0;
        let mut m4 = 0.0;
        for v in values {
            let d = v - mean;
            m2 += d * d;
            m4 += d * d * d * d;
        }
        m2 /= n;
        m4 /= n;
        let sample_variance = if values.len() > 1 {
            m2 * n / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            sample_variance,
            m2,
            m4,
        }
    }
}
