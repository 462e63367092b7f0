use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};

use crate::CliError;

/// Opens the report destination; "stdout" or "-" selects standard output.
pub fn open_output(spec: &str) -> Result<Box<dyn Write>, CliError> {
    Ok(match spec {
        "stdout" | "-" => Box::new(BufWriter::new(io::stdout())),
        path => Box::new(BufWriter::new(File::create(path).map_err(|e| CliError {
            code: crate::EXIT_IO,
            message: format!("cannot create {path}: {e}"),
        })?)),
    })
}

/// Opens an input source; "-" selects standard input.
pub fn open_input(spec: &str) -> Result<Box<dyn BufRead>, CliError> {
    Ok(match spec {
        "-" => Box::new(BufReader::new(io::stdin())),
        path => Box::new(BufReader::new(File::open(path).map_err(|e| CliError {
            code: crate::EXIT_IO,
            message: format!("cannot open {path}: {e}"),
        })?)),
    })
}

/// Formats with 17 significant digits so every f64 round-trips exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
