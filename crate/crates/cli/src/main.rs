use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use malab_cli::commands::{self, MonitorKind};
use malab_cli::manifest::{self, Manifest};
use malab_cli::verify::{VerifyKind, VerifyOptions};
use malab_cli::{CliError, CliResult};

/// Numerical laboratory for degenerate Monge-Ampère equations.
#[derive(Parser)]
#[command(name = "malab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one Dirichlet problem; writes <out>.csv and <out>.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Boundary sections over a height ladder; writes <out>.csv and <out>.json.
    Sections {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One monitor on a solved field; writes <out>.json (and <out>.csv).
    Monitor {
        #[arg(long, value_enum)]
        kind: MonitorKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form verification suite; prints the JSON report.
    Verify {
        #[arg(long, value_enum)]
        kind: VerifyKind,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 10_000)]
        barrier_samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the experiments of a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run only these experiments (repeatable).
        #[arg(long)]
        only: Vec<String>,
    },
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn execute(cmd: Command) -> CliResult<bool> {
    match cmd {
        Command::Solve { config, out } => {
            let s = commands::solve(&config, &out)?;
            print_json(&s);
            Ok(s.converged)
        }
        Command::Sections { config, out } => {
            print_json(&commands::sections(&config, &out)?);
            Ok(true)
        }
        Command::Monitor { kind, config, out } => {
            print_json(&commands::monitor(kind, &config, &out)?);
            Ok(true)
        }
        Command::Verify {
            kind,
            samples,
            barrier_samples,
            seed,
            out,
        } => {
            let opts = VerifyOptions {
                samples,
                barrier_samples,
                seed,
                ..Default::default()
            };
            let rep = commands::verify_command(kind, &opts, out.as_deref())?;
            print_json(&rep);
            Ok(rep.pass)
        }
        Command::Run {
            manifest,
            out,
            only,
        } => {
            let m = Manifest::load(&manifest)?.select(&only)?;
            let threads = manifest::thread_count()?;
            let (run, summaries) = manifest::run(&m, &out, threads)?;
            for s in &summaries {
                let status = if s.pass { "PASS" } else { "FAIL" };
                match &s.error {
                    Some(e) => eprintln!("{status} {} ({e})", s.name),
                    None => eprintln!("{status} {}", s.name),
                }
            }
            Ok(run.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("malab: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}
