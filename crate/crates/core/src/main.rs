use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spectrum_share::engine::{self, RunOptions, SweepAxis};
use spectrum_share::report::{self, CsvReport};
use spectrum_share::{Error, Result, Scenario};

#[derive(Parser)]
#[command(name = "spectrum-share", version, about = "Spectrum sharing simulator with CR sensing nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report as CSV.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the message trace (tab-separated) to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario over a list of axis values with replications.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// mean_arrival, correlation or sharing
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text)
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, seed, trace, out } => {
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let opts = RunOptions { trace: trace.is_some(), ..RunOptions::default() };
            let result = engine::run(&s, &opts)?;
            if let Some(path) = trace {
                let mut buf = Vec::new();
                report::write_trace(&mut buf, &result.trace)?;
                fs::write(path, buf)?;
            }
            let csv = report::run_csv(&s.id, s.seed, &result.report)?;
            write_out(out.as_deref(), csv.as_bytes())
        }
        Command::Sweep { scenario, axis, values, reps, out } => {
            let s = load(&scenario)?;
            let axis: SweepAxis = axis.parse()?;
            let rows = engine::sweep(&s, axis, &values, reps)?;
            let mut w = CsvReport::new(Vec::new())?;
            w.write_sweep(&s.id, &rows)?;
            write_out(Some(&out), &w.finish()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
