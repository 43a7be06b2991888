use clap::{Parser, Subcommand};
use cuntzlab::cli::{self, RunOptions, Status, OUT_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cuntzlab", about = "Cuntz representations and shift endomorphisms on finite truncations")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config.
    Run {
        config: PathBuf,
        /// Cells evaluated in parallel.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory.
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        /// Multiplies every tolerance in the config.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
    /// Print the sequence generator catalog.
    ListGenerators,
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Schema.code() } else { 0 });
        }
    };
    match args.command {
        Command::Version => {
            println!("cuntzlab {}", cli::VERSION);
            ExitCode::SUCCESS
        }
        Command::ListGenerators => {
            for line in cli::list_generators() {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, jobs, out, tolerance_scale } => {
            let outcome = cli::run_file(&config, &RunOptions { jobs, out, tolerance_scale });
            for m in &outcome.messages {
                eprintln!("{m}");
            }
            if let Some(p) = &outcome.report_path {
                if outcome.execution.is_some() {
                    eprintln!("report: {}", p.display());
                }
            }
            if let Some(e) = &outcome.execution {
                let passed = e.report.cells.iter().filter(|c| c.passed).count();
                eprintln!("{} of {} cells passed ({})", passed, e.report.cells.len(), outcome.status.as_str());
            }
            ExitCode::from(outcome.status.code())
        }
    }
}
