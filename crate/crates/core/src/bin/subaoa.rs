//! Command-line front end for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subaoa::harness::{self, CliError, CommonArgs};

#[derive(Parser)]
#[command(name = "subaoa", version, about = "Multipath AoA estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios through the estimators and score them against truth.
    Run(Flags),
    /// Sweep SNR, path separation or signal length over seeded trials.
    Sweep(Flags),
    /// Median runtimes over a grid of array sizes, lengths and path counts.
    Bench(Flags),
    /// Render a scenario to a WAV file plus truth JSON.
    Simulate(Flags),
    /// Write per-iteration spectra for the configured scenarios.
    Spectrum(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated subset of subaoa,music,gcc,das.
    #[arg(long)]
    algorithms: Option<String>,
}

impl Flags {
    fn common(self) -> Result<CommonArgs, CliError> {
        let algorithms = self
            .algorithms
            .as_deref()
            .map(harness::parse_algorithms)
            .transpose()
            .map_err(CliError::Config)?;
        Ok(CommonArgs {
            config: self.config,
            out: self.out,
            seed: self.seed,
            jobs: self.jobs,
            algorithms,
        })
    }
}

fn dispatch(cmd: Command) -> Result<String, CliError> {
    Ok(match cmd {
        Command::Run(f) => {
            let recs = harness::cmd_run(&f.common()?)?;
            format!("{} result rows", recs.len())
        }
        Command::Sweep(f) => {
            let recs = harness::cmd_sweep(&f.common()?)?;
            format!("{} sweep rows", recs.len())
        }
        Command::Bench(f) => {
            let recs = harness::cmd_bench(&f.common()?)?;
            let mut s = String::new();
            for r in recs {
                s.push_str(&format!(
                    "{:<7} M={} T={} K={} {:.3} ms\n",
                    r.algorithm, r.mics, r.frames, r.paths, r.median_ms
                ));
            }
            s.trim_end().to_string()
        }
        Command::Simulate(f) => {
            let truth = harness::cmd_simulate(&f.common()?)?;
            let angles: Vec<String> = truth.scenario.paths.iter().map(|p| format!("{:.1}", p.aoa)).collect();
            format!("wrote {} (paths at {} deg)", truth.wav, angles.join(", "))
        }
        Command::Spectrum(f) => {
            let n = harness::cmd_spectrum(&f.common()?)?;
            format!("{n} spectra")
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("subaoa: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
