use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfc_harness::{run_and_write, Experiment, ExperimentConfig, Report};

#[derive(Parser)]
#[command(name = "rates", about = "Rate experiments for the mean-field-control laboratory")]
struct Cli {
    /// TOML config (JSON when the extension is .json); acceptance defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for concurrent cells; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Treat any failed cell as a failure of the run.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    EmpiricalW1,
    VanishingViscosity,
    ColeHopf,
    Coupon,
    SupconvCheck,
    MfcGap,
    ProjectCheck,
    MfcRegularity,
    FpStability,
    All,
}

impl Command {
    fn experiments(self) -> Vec<Experiment> {
        match self {
            Command::EmpiricalW1 => vec![Experiment::EmpiricalW1],
            Command::VanishingViscosity => vec![Experiment::VanishingViscosity],
            Command::ColeHopf => vec![Experiment::ColeHopf],
            Command::Coupon => vec![Experiment::Coupon],
            Command::SupconvCheck => vec![Experiment::SupconvCheck],
            Command::MfcGap => vec![Experiment::MfcGap],
            Command::ProjectCheck => vec![Experiment::ProjectCheck],
            Command::MfcRegularity => vec![Experiment::MfcRegularity],
            Command::FpStability => vec![Experiment::FpStability],
            Command::All => Experiment::ALL.to_vec(),
        }
    }
}

fn print_report(report: &Report) {
    for c in &report.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        println!("{verdict} [{}] {}: {:.6e} ({})", c.experiment, c.name, c.value, c.detail);
    }
    let failed = report.failed_cells();
    if failed > 0 {
        println!("[{}] {failed} of {} cells failed", report.experiment, report.cells.len());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("rates: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let mut ok = true;
    for experiment in cli.command.experiments() {
        match run_and_write(experiment, &cfg, threads, &cfg.output) {
            Ok(report) => {
                print_report(&report);
                ok &= report.passed() && !(cli.strict && report.failed_cells() > 0);
            }
            Err(e) => {
                eprintln!("rates {}: {e}", experiment.name());
                return ExitCode::from(2);
            }
        }
    }
    if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
