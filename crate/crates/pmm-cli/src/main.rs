use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pmm_cli::format::to_line;
use pmm_cli::report::{self, ReportKind};
use pmm_cli::run::{read_trace, run_scenario, write_trace};
use pmm_cli::scenario::{FeeKind, Overrides, Scenario};
use pmm_core::engine::Mode;

#[derive(Parser)]
#[command(
    name = "pmm",
    version,
    about = "Parallel market makers: scenario replay and reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a scenario and write its JSON-lines trace.
    Run {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, value_enum)]
        fee: Option<FeeArg>,
    },
    /// Write a CSV report.
    Report {
        /// Trace file; required by price-path and liquidity-profile.
        trace: Option<PathBuf>,
        #[arg(long)]
        kind: String,
        /// Grid resolution (liquidity-profile) or samples per cell (table1-check).
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the equivalence suite and print its JSON report.
    Equivalence {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        /// Number of LPs, creator included.
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Lenient,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeeArg {
    NormL1,
    NormL2,
    PositivePart,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Exit code 2: the input could not be parsed or validated.
struct Invalid(anyhow::Error);

fn run(file: &Path, out: Option<&Path>, overrides: Overrides) -> Result<ExitCode, Invalid> {
    let mut scenario = Scenario::load(file).map_err(|e| Invalid(e.into()))?;
    scenario.apply(overrides);
    scenario.validate().map_err(|e| Invalid(e.into()))?;
    let outcome = run_scenario(&scenario);
    let write = || -> Result<()> {
        let mut w = output(out)?;
        write_trace(&outcome.records, &mut w)?;
        w.flush()?;
        Ok(())
    };
    if let Err(e) = write() {
        eprintln!("error: {e:#}");
        return Ok(ExitCode::FAILURE);
    }
    match outcome.failure {
        Some(f) => {
            eprintln!("event {} ({}) failed: {}", f.index, f.event, f.reason);
            Ok(ExitCode::from(1))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

#[allow(clippy::too_many_arguments)]
fn report_cmd(
    trace: Option<&Path>,
    kind: &str,
    grid: usize,
    n: usize,
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<ExitCode, Invalid> {
    let kind: ReportKind = kind
        .parse()
        .map_err(|e: report::ReportError| Invalid(e.into()))?;
    let records = if kind.needs_trace() {
        let Some(path) = trace else {
            return Err(Invalid(anyhow::anyhow!(
                "{} needs a trace file",
                kind.name()
            )));
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))
            .map_err(Invalid)?;
        read_trace(&text)
            .context("malformed trace")
            .map_err(Invalid)?
    } else {
        Vec::new()
    };
    let result = (|| -> Result<()> {
        let w = output(out)?;
        match kind {
            ReportKind::PricePath => report::write_price_path(&report::price_path(&records), w)?,
            ReportKind::LiquidityProfile => {
                report::write_liquidity_profile(&report::liquidity_profile(&records, grid)?, w)?
            }
            ReportKind::Table1Check => report::write_table1(&report::table1_rows(grid, seed)?, w)?,
            ReportKind::Equivalence => {
                report::write_equivalence(&report::equivalence(n, 3, trials, seed)?, w)?
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(ExitCode::SUCCESS),
        Err(e) => {
            eprintln!("error: {e:#}");
            Ok(ExitCode::from(1))
        }
    }
}

fn equivalence_cmd(
    n: usize,
    trials: usize,
    seed: u64,
    k: usize,
    out: Option<&Path>,
) -> Result<ExitCode> {
    if n < 2 || k == 0 {
        bail!("need n ≥ 2 and k ≥ 1");
    }
    let rep = report::equivalence(n, k, trials, seed)?;
    let mut w = output(out)?;
    writeln!(w, "{}", to_line(&rep)?)?;
    w.flush()?;
    eprintln!(
        "{} trials, {} failures, max net deviation {:.3e}, max coherence {:.3e}",
        rep.outcomes.len(),
        rep.failures,
        rep.max_net_deviation,
        rep.max_coherence
    );
    Ok(if rep.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            file,
            out,
            mode,
            beta,
            fee,
        } => {
            let overrides = Overrides {
                mode: mode.map(|m| match m {
                    ModeArg::Strict => Mode::Strict,
                    ModeArg::Lenient => Mode::Lenient,
                }),
                fee: fee.map(|f| match f {
                    FeeArg::NormL1 => FeeKind::NormL1,
                    FeeArg::NormL2 => FeeKind::NormL2,
                    FeeArg::PositivePart => FeeKind::PositivePart,
                }),
                beta,
            };
            run(&file, out.as_deref(), overrides)
        }
        Command::Report {
            trace,
            kind,
            grid,
            n,
            trials,
            seed,
            out,
        } => report_cmd(
            trace.as_deref(),
            &kind,
            grid,
            n,
            trials,
            seed,
            out.as_deref(),
        ),
        Command::Equivalence {
            n,
            trials,
            seed,
            k,
            out,
        } => equivalence_cmd(n, trials, seed, k, out.as_deref()).map_err(Invalid),
    };
    match result {
        Ok(code) => code,
        Err(Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
