//! Command-line front end: `simulate`, `gen`, `extract` and `power`.
//!
//! Exit codes: 0 success, 1 other errors, 2 configuration errors, 3 too many
//! failed fits, 4 malformed input data.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{RunConfigFile, SpecList};
use crate::datagen::{sample_dataset, true_parameters};
use crate::error::{Error, Result};
use crate::extract::{extract_parameters, heterogeneity_diagnostics, load_dataset};
use crate::harness::run_experiment;
use crate::report::{power_rows_from_summary, read_rows, summary_lines, write_json, write_rows, FitSummaryRow};

#[derive(Debug, Parser)]
#[command(name = "metareg", version, about = "Meta-regression specification simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated list such as `FE_s,FE_lTrend`.
        #[arg(long)]
        specs: Option<String>,
        /// Literal variance-component and scalar standard-error formulas.
        #[arg(long)]
        strict_paper: bool,
    },
    /// Write one sampled dataset as CSV and print its true parameters.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract simulation parameters and diagnostics from a dataset CSV.
    Extract {
        data: PathBuf,
        /// Directory for `extracted.json` and `diagnostics.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expand a `fit_summary.csv` into `power_curve.csv`.
    Power {
        summary: PathBuf,
        /// Directory for `power_curve.csv`; defaults to the working directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidPlan(_) | Error::UnsupportedCovariateCount(_) => 2,
        Error::ExcessiveFailures { .. } => 3,
        Error::Parse { .. }
        | Error::MissingValue { .. }
        | Error::Validation(_)
        | Error::DegenerateVariable(_)
        | Error::InsufficientGroups(_) => 4,
        _ => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfigFile> {
    RunConfigFile::load(path)
}

pub fn execute<W: Write>(command: Command, out: &mut W) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            out: dir,
            iterations,
            seed,
            specs,
            strict_paper,
        } => {
            let mut file = load_config(&config)?;
            if let Some(i) = iterations {
                file.experiment.iterations = i;
            }
            if let Some(s) = seed {
                file.experiment.seed = s;
            }
            if let Some(s) = specs {
                file.experiment.specs = SpecList::Keyword(s);
            }
            if let Some(d) = dir {
                file.output.directory = d;
            }
            let mut plan = file.plan()?;
            plan.settings.options.strict_paper = strict_paper;
            let result = run_experiment(&plan)?;
            for cell in &result.cells {
                for line in summary_lines(cell) {
                    writeln!(out, "{line}")?;
                }
                eprintln!("{}: {:.2?}", cell.config.label(), cell.wall_time);
            }
            Ok(())
        }
        Command::Gen { config, out: path, seed } => {
            let mut file = load_config(&config)?;
            if let Some(s) = seed {
                file.experiment.seed = s;
            }
            let plan = file.plan()?;
            let cell = &plan.cells[0];
            let data = sample_dataset(cell, plan.settings.policy.stream(cell.seed, 0, 0))?;
            let f = std::fs::File::create(&path)?;
            data.write_csv(std::io::BufWriter::new(f))?;
            let truth = true_parameters(cell)?;
            serde_json::to_writer_pretty(&mut *out, &truth).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
            Ok(())
        }
        Command::Extract { data, out: dir } => {
            let dataset = load_dataset(&data).map_err(|e| match e {
                Error::Io(m) => Error::Parse {
                    row: 0,
                    column: "-".into(),
                    message: format!("{}: {m}", data.display()),
                },
                other => other,
            })?;
            let params = extract_parameters(&dataset)?;
            let report = heterogeneity_diagnostics(&dataset)?;
            let text = report.to_text();
            match dir {
                Some(d) => {
                    std::fs::create_dir_all(&d)?;
                    write_json(&d.join("extracted.json"), &params)?;
                    std::fs::write(d.join("diagnostics.txt"), &text)?;
                }
                None => {
                    serde_json::to_writer_pretty(&mut *out, &params).map_err(|e| Error::Io(e.to_string()))?;
                    writeln!(out)?;
                }
            }
            write!(out, "{text}")?;
            Ok(())
        }
        Command::Power { summary, out: dir } => {
            let rows: Vec<FitSummaryRow> = read_rows(&summary).map_err(|e| match e {
                Error::Io(m) => Error::Parse {
                    row: 0,
                    column: "-".into(),
                    message: format!("{}: {m}", summary.display()),
                },
                other => other,
            })?;
            if rows.is_empty() {
                return Err(Error::Validation("fit summary has no rows".into()));
            }
            let power = power_rows_from_summary(&rows).map_err(|e| Error::Validation(e.to_string()))?;
            let dir = dir.unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("power_curve.csv");
            write_rows(std::io::BufWriter::new(std::fs::File::create(&path)?), &power)?;
            writeln!(out, "wrote {} rows to {}", power.len(), path.display())?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_by_kind() {
        assert_eq!(exit_code(&Error::Config { field: "x".into(), message: String::new() }), 2);
        assert_eq!(
            exit_code(&Error::ExcessiveFailures { spec: "FE_s".into(), failures: 2, iterations: 3 }),
            3
        );
        assert_eq!(exit_code(&Error::MissingValue { row: 1, column: "y".into() }), 4);
        assert_eq!(exit_code(&Error::Io("x".into())), 1);
    }

    #[test]
    fn flags_parse() {
        let c = Cli::try_parse_from([
            "metareg", "simulate", "--config", "a.toml", "--iterations", "5", "--specs", "FE_s,FE_t", "--strict-paper",
        ])
        .unwrap();
        match c.command {
            Command::Simulate { iterations, strict_paper, specs, .. } => {
                assert_eq!(iterations, Some(5));
                assert!(strict_paper);
                assert_eq!(specs.as_deref(), Some("FE_s,FE_t"));
            }
            other => panic!("{other:?}"),
        }
    }
}
