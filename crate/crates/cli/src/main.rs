use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dollo_core::config::{parse_par, RunConfig};
use dollo_core::output::with_suffix;
use dollo_core::runner::{self, output_stem, RunReport};

mod analyse;
mod simulate;

#[derive(Parser)]
#[command(
    name = "dollo",
    version,
    about = "Stochastic Dollo phylogenetics: fit, couple, simulate, analyse"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chain as described by a `.par` file.
    Fit {
        par: PathBuf,
        /// Appended to every output file name.
        suffix: Option<String>,
    },
    /// Run a lag-coupled pair of chains.
    Couple {
        par: PathBuf,
        suffix: Option<String>,
    },
    /// Generate a synthetic data set.
    Simulate(simulate::SimulateArgs),
    /// Summaries of run output and data.
    Analyse {
        #[command(subcommand)]
        what: analyse::Analysis,
    },
}

fn load_par(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config = parse_par(&text).with_context(|| format!("in {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    config.resolve_paths(base);
    Ok(config)
}

/// Prints monitor lines and copies them to `<stem>.log`.
fn with_log(
    stem: &Path,
    body: impl FnOnce(&mut dyn FnMut(&str)) -> dollo_core::Result<RunReport>,
) -> Result<RunReport> {
    let path = with_suffix(stem, ".log");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut log = BufWriter::new(file);
    let mut failed = None;
    let report = body(&mut |line: &str| {
        println!("{line}");
        if let Err(e) = writeln!(log, "{line}") {
            failed.get_or_insert(e);
        }
    });
    let report = report?;
    if let Some(e) = failed {
        return Err(e).with_context(|| format!("writing {}", path.display()));
    }
    let mut summary = format!(
        "seed {}; {} samples written to {}",
        report.seed,
        report.n_samples,
        report.stem.display()
    );
    if let Some(tau) = report.tau {
        summary.push_str(&format!("; chains met at iteration {tau}"));
    }
    println!("{summary}");
    writeln!(log, "{summary}")
        .and_then(|_| log.flush())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(report)
}

fn fit(par: &Path, suffix: Option<&str>) -> Result<()> {
    let config = load_par(par)?;
    let stem = output_stem(&config, suffix);
    with_log(&stem, |m| runner::fit(&config, suffix, m))?;
    Ok(())
}

fn couple(par: &Path, suffix: Option<&str>) -> Result<()> {
    let config = load_par(par)?;
    let stem = output_stem(&config, suffix);
    let report = with_log(&stem, |m| runner::couple(&config, suffix, m))?;
    if report.tau.is_none() {
        println!(
            "chains did not meet within {} iterations",
            config.coupling_max_iterations
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit { par, suffix } => fit(par, suffix.as_deref()),
        Command::Couple { par, suffix } => couple(par, suffix.as_deref()),
        Command::Simulate(args) => simulate::run(args),
        Command::Analyse { what } => analyse::run(what),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
