mod compare;
mod out;
mod simulate;
mod sketchio;
mod stream;

use clap::{Parser, Subcommand, ValueEnum};
use rrbit::ExtremeKind;

use compare::CompareMode;

pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_TOLERANCE: i32 = 4;

/// A failure with the exit code it maps to: 1 for I/O, 2 for parse
/// errors, 3 for violated preconditions, 4 for tolerance breaches.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_PRECONDITION,
            message: message.into(),
        }
    }

    pub fn tolerance(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_TOLERANCE,
            message: message.into(),
        }
    }

    /// Prefixes an input line number onto the message.
    pub fn at_line(self, lineno: u64) -> Self {
        Self {
            code: self.code,
            message: format!("line {lineno}: {}", self.message),
        }
    }
}

impl From<rrbit::Error> for CliError {
    fn from(e: rrbit::Error) -> Self {
        let code = match e {
            rrbit::Error::SketchFormat(_) => EXIT_PARSE,
            _ => EXIT_PRECONDITION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Parser)]
#[command(
    name = "rrbit",
    version,
    about = "Estimate ORs, ANDs, and set-union sizes from randomized-response bits",
    after_help = "Exit codes: 0 success, 1 I/O failure, 2 parse error, \
                  3 precondition violation, 4 estimator disagreement."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Base seed for every randomized step; reruns with the same seed and
    /// inputs are byte-identical.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Where to write results: a file path, or "stdout".
    #[arg(long, global = true, default_value = "stdout")]
    output: String,

    /// Report encoding. Defaults to json for the estimate commands and
    /// csv for compare and simulate.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Pass exact set sketches through randomized response.
    ///
    /// Reads one sketch JSON object per line, flips each bit with the
    /// selected probability, and writes the privatized sketches in the
    /// same format. Exactly one of --q or --epsilon must be given.
    Privatize {
        /// Sketch file to read, or "-" for stdin.
        #[arg(long, default_value = "-")]
        input: String,
        /// Flip probability in [0, 1/2).
        #[arg(long, required_unless_present = "epsilon", conflicts_with = "epsilon")]
        q: Option<f64>,
        /// Privacy budget; selects q = 1/(e^epsilon + 1).
        #[arg(long)]
        epsilon: Option<f64>,
    },

    /// Estimate the OR of hidden bits from a noisy bit stream.
    ///
    /// Input is one "bit,q" pair per line. Runs in a single pass with
    /// constant memory and reports the raw unbiased estimate, a clamped
    /// display value, the bit count, and the worst-case variance bound.
    EstimateOr {
        /// Stream file to read, or "-" for stdin.
        #[arg(long, default_value = "-")]
        input: String,
    },

    /// Estimate the AND of hidden bits from a noisy bit stream.
    EstimateAnd {
        /// Stream file to read, or "-" for stdin.
        #[arg(long, default_value = "-")]
        input: String,
    },

    /// Estimate the union size behind privatized sketches.
    ///
    /// Reads one privatized sketch per line; all sketches must share one
    /// universe size m.
    EstimateUnion {
        /// Sketch file to read, or "-" for stdin.
        #[arg(long, default_value = "-")]
        input: String,
    },

    /// Run the three OR estimators side by side and check they agree.
    ///
    /// Emits one row per observed input with the streaming, sum-inverse,
    /// and joint-inverse estimates plus their largest pairwise gap. Exits
    /// with code 4 if any relative gap exceeds 1e-8.
    Compare {
        /// Number of bits, at least 1.
        #[arg(long)]
        n: usize,
        /// Shared flip probability, 0 < q < 1/2.
        #[arg(long)]
        q: f64,
        /// sums: one row per noisy sum, n <= 24. dense: one row per
        /// observed sequence using the materialized joint inverse,
        /// n <= 12.
        #[arg(long, value_enum, default_value_t = CompareMode::Sums)]
        mode: CompareMode,
    },

    /// Monte-Carlo experiments comparing empirical moments to theory.
    ///
    /// The config is flat JSON. Fields: scenario ("or-bits" or "union"),
    /// q (number or per-party list), trials, optional seed (falls back
    /// to --seed), plus true_bits for or-bits and m with sets for union.
    Simulate {
        /// Config file to read, or "-" for stdin.
        #[arg(long, default_value = "-")]
        config: String,
        /// Emit one row per trial instead of the summary row.
        #[arg(long)]
        per_trial: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let mut out = match out::open_output(&cli.output) {
        Ok(w) => w,
        Err(e) => return fail(e),
    };
    let result = dispatch(&cli, &mut *out);
    let flushed = out.flush();
    match result {
        Err(e) => fail(e),
        Ok(()) => match flushed {
            Ok(()) => 0,
            Err(e) => fail(e.into()),
        },
    }
}

fn fail(e: CliError) -> i32 {
    eprintln!("error: {}", e.message);
    e.code
}

fn dispatch(cli: &Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Privatize { input, q, epsilon } => {
            sketchio::cmd_privatize(input, *q, *epsilon, cli.seed, out)
        }
        Command::EstimateOr { input } => stream::cmd_estimate(
            ExtremeKind::Or,
            input,
            cli.format.unwrap_or(OutputFormat::Json),
            out,
        ),
        Command::EstimateAnd { input } => stream::cmd_estimate(
            ExtremeKind::And,
            input,
            cli.format.unwrap_or(OutputFormat::Json),
            out,
        ),
        Command::EstimateUnion { input } => {
            sketchio::cmd_estimate_union(input, cli.format.unwrap_or(OutputFormat::Json), out)
        }
        Command::Compare { n, q, mode } => {
            compare::cmd_compare(*n, *q, *mode, cli.format.unwrap_or(OutputFormat::Csv), out)
        }
        Command::Simulate { config, per_trial } => simulate::cmd_simulate(
            config,
            cli.seed,
            *per_trial,
            cli.format.unwrap_or(OutputFormat::Csv),
            out,
        ),
    }
}
