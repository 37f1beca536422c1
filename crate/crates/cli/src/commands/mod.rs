//! One module per subcommand; each `run` returns the output to write.

pub mod bench;
pub mod fit;
pub mod generate;
pub mod hist;
pub mod integrate;
pub mod phsp;
pub mod splot;
pub mod toys;

use std::collections::BTreeMap;
use std::path::Path;

use hepflow::csv::parse_csv;
use hepflow::fitting::{FitConfig, MinimizerConfig};
use hepflow::store::ColumnStore;

use crate::args::ModelArgs;
use crate::error::CliError;
use crate::model::ModelKind;
use crate::values::{parse_assignments, parse_names, parse_range};

/// Reads a CSV file with every column parsed as real64.
pub fn read_store(path: &Path) -> Result<ColumnStore, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::domain(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text, None).map_err(|e| CliError::domain(format!("{}: {e}", path.display())))
}

/// Parsed form of [`ModelArgs`].
pub struct ModelChoice {
    pub kind: ModelKind,
    pub range: (f64, f64),
    pub init: BTreeMap<String, f64>,
    pub fix: Vec<String>,
}

impl ModelChoice {
    pub fn parse(args: &ModelArgs) -> Result<Self, CliError> {
        Ok(Self {
            kind: args.model.parse().map_err(CliError::usage)?,
            range: parse_range(&args.range).map_err(CliError::usage)?,
            init: parse_assignments(&args.init).map_err(CliError::usage)?,
            fix: parse_names(&args.fix).map_err(CliError::usage)?,
        })
    }
}

pub fn fit_config(max_iterations: usize, tolerance: f64) -> Result<FitConfig, CliError> {
    if !(tolerance > 0.0) || max_iterations == 0 {
        return Err(CliError::usage("--max-iterations and --tolerance must be positive"));
    }
    Ok(FitConfig {
        minimizer: MinimizerConfig {
            max_iterations,
            tolerance,
            ..MinimizerConfig::default()
        },
        ..FitConfig::default()
    })
}
