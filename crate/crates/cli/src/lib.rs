#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Command-line front end for `hepflow`.
//!
//! [`run`] parses arguments, merges a `--config` file, prints the resolved
//! configuration to stderr and dispatches to one of the subcommands in
//! [`commands`]. Exit codes: 0 success, 1 failed operation, 2 usage error.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod model;
pub mod values;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, IsTerminal, Write};
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, CommandFactory, FromArgMatches};
use hepflow::csv::write_csv;
use hepflow::parallel::WorkerPool;
use hepflow::store::ColumnStore;

use crate::args::{Cli, Command, Method};
use crate::config::parse_config;
use crate::error::CliError;

/// Everything a subcommand needs besides its own flags.
pub struct Ctx {
    pub pool: WorkerPool,
    pub seed: u64,
}

/// Result of a subcommand, written to `--output` or stdout.
pub enum Output {
    Text(String),
    Store(ColumnStore),
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run(argv: Vec<OsString>) -> i32 {
    match parse(argv) {
        Ok((cli, matches)) => match execute(cli, &matches) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(Parsed::Clap(e)) => {
            let _ = e.print();
            if e.use_stderr() { 2 } else { 0 }
        }
        Err(Parsed::Cli(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

enum Parsed {
    Clap(clap::Error),
    Cli(CliError),
}

impl From<clap::Error> for Parsed {
    fn from(e: clap::Error) -> Self {
        Parsed::Clap(e)
    }
}

impl From<CliError> for Parsed {
    fn from(e: CliError) -> Self {
        Parsed::Cli(e)
    }
}

fn parse(argv: Vec<OsString>) -> Result<(Cli, ArgMatches), Parsed> {
    let mut cmd = Cli::command();
    cmd.build();
    // Lenient pass: flags may still be missing until the config file is merged.
    let matches = cmd.clone().ignore_errors(true).try_get_matches_from(&argv)?;
    let argv = match matches.get_one::<PathBuf>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            let entries = parse_config(&text).map_err(CliError::usage)?;
            let extra = config_flags(&cmd, &matches, &entries)?;
            argv.into_iter().chain(extra).collect()
        }
        None => argv,
    };
    let matches = cmd.try_get_matches_from(argv)?;
    let cli = Cli::from_arg_matches(&matches)?;
    Ok((cli, matches))
}

/// Flags for config entries not already given on the command line.
fn config_flags(
    cmd: &clap::Command,
    matches: &ArgMatches,
    entries: &[(String, String)],
) -> Result<Vec<OsString>, CliError> {
    let Some((name, sub)) = matches.subcommand() else {
        return Ok(Vec::new());
    };
    let sub_cmd = cmd.find_subcommand(name).expect("matched subcommand exists");
    let mut out = Vec::new();
    for (key, value) in entries {
        let arg = sub_cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && !matches!(key.as_str(), "config" | "help" | "version"))
            .ok_or_else(|| CliError::usage(format!("unknown config key `{key}` for `{name}`")))?;
        if sub.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" => out.push(format!("--{key}").into()),
                "false" => {}
                other => return Err(CliError::usage(format!("config key `{key}` takes true or false, got `{other}`"))),
            }
        } else {
            out.push(format!("--{key}={value}").into());
        }
    }
    Ok(out)
}

fn randomized(command: &Command) -> bool {
    match command {
        Command::Integrate(a) => matches!(a.method, Method::Plain | Method::Vegas),
        Command::Phsp(_) | Command::Toys(_) | Command::Generate(_) | Command::Bench(_) => true,
        Command::Fit(_) | Command::Splot(_) | Command::Hist(_) => false,
    }
}

fn execute(cli: Cli, matches: &ArgMatches) -> Result<(), CliError> {
    let seed = match cli.seed {
        Some(s) => s,
        None if randomized(&cli.command) && !io::stdin().is_terminal() => {
            return Err(CliError::usage("--seed is required for randomized subcommands in non-interactive use"));
        }
        None => 0,
    };
    let pool = WorkerPool::new(cli.workers);
    print_config(matches, pool.workers(), seed);
    let ctx = Ctx { pool, seed };
    let output = match &cli.command {
        Command::Phsp(a) => commands::phsp::run(a, &ctx),
        Command::Integrate(a) => commands::integrate::run(a, &ctx),
        Command::Fit(a) => commands::fit::run(a, &ctx),
        Command::Toys(a) => commands::toys::run(a, &ctx),
        Command::Splot(a) => commands::splot::run(a, &ctx),
        Command::Generate(a) => commands::generate::run(a, &ctx),
        Command::Hist(a) => commands::hist::run(a, &ctx),
        Command::Bench(a) => commands::bench::run(a, &ctx),
    }?;
    write_output(&output, cli.output.as_ref())
        .map_err(|e| CliError::domain(format!("cannot write output: {e}")))
}

/// Prints the resolved configuration as config-file lines.
fn print_config(matches: &ArgMatches, workers: usize, seed: u64) {
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut cmd = Cli::command();
    cmd.build();
    let sub_cmd = cmd.find_subcommand(name).expect("matched subcommand exists");
    let mut err = io::stderr().lock();
    let _ = writeln!(err, "# hepflow {name}");
    for arg in sub_cmd.get_arguments() {
        let id = arg.get_id().as_str();
        let Some(long) = arg.get_long() else { continue };
        let value = match id {
            "help" | "version" | "config" => continue,
            "workers" => workers.to_string(),
            "seed" => seed.to_string(),
            _ => match sub.get_raw(id) {
                Some(raw) => raw.map(|v| v.to_string_lossy().into_owned()).collect::<Vec<_>>().join(","),
                None => continue,
            },
        };
        let _ = writeln!(err, "{long} = {value}");
    }
}

fn write_output(output: &Output, path: Option<&PathBuf>) -> io::Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match output {
        Output::Text(t) => sink.write_all(t.as_bytes())?,
        Output::Store(s) => write_csv(s, &mut sink)?,
    }
    sink.flush()
}
