use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use snapstab::cli::{self, ExperimentArgs, ExperimentConfig, FuzzOptions};
use snapstab::Error;

#[derive(Parser)]
#[command(name = "snapstab", version, about = "Run, fuzz, check and replay snap-stabilizing message-passing protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

impl Common {
    fn resolve(self) -> Result<ExperimentConfig, Error> {
        let file = match &self.config {
            Some(path) => ExperimentArgs::load(path)?,
            None => ExperimentArgs::default(),
        };
        ExperimentConfig::resolve(self.experiment.over(file))
    }
}

#[derive(Subcommand)]
enum Command {
    /// One run; prints verdict lines.
    Run {
        #[command(flatten)]
        common: Common,
        /// Save the trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Many seeded runs from arbitrary starting configurations.
    Fuzz {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// Re-run inconclusive seeds with this many times the step bound.
        #[arg(long, default_value_t = 4)]
        retry_factor: u64,
        /// Directory for traces of failing seeds.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Exhaustive search of two-process PIF.
    Check {
        #[command(flatten)]
        common: Common,
        /// Save a counterexample trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Re-execute a trace, verify its digests and re-judge it.
    Replay {
        trace: PathBuf,
    },
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32, Error> {
    match command {
        Command::Run { common, trace_out } => cli::cmd_run(&common.resolve()?, trace_out.as_deref(), out),
        Command::Fuzz { common, seeds, retry_factor, out_dir } => {
            cli::cmd_fuzz(&common.resolve()?, &FuzzOptions { seeds, retry_factor, out_dir }, out)
        }
        Command::Check { common, trace_out } => {
            let mut args = common;
            args.experiment.policy.get_or_insert(cli::PolicyKind::Exhaustive);
            cli::cmd_check(&args.resolve()?, trace_out.as_deref(), out)
        }
        Command::Replay { trace } => cli::cmd_replay(&trace, out, &mut io::stderr()),
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = match execute(args.command, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("snapstab: {e}");
            cli::error_exit_code(&e)
        }
    };
    let _ = out.flush();
    ExitCode::from(code as u8)
}
