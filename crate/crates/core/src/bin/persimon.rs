use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use persimon::cli::{cmd_gradcheck, cmd_optimize, cmd_simulate, CommandOptions};
use persimon::{Error, InfoMode};

#[derive(Parser)]
#[command(
    name = "persimon",
    version,
    about = "Persistent monitoring simulator and IPA optimizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Parameter file overriding the scenario's theta0/w0.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Information mode override: centralized, almost or local.
    #[arg(long)]
    mode: Option<InfoMode>,
    /// Reserved; all commands are deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Write per-agent event logs with a visibility column.
    #[arg(long)]
    audit_events: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate once and write trajectory, events and summary.
    Simulate(Common),
    /// Run projected gradient descent.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Iteration budget override.
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Compare IPA gradients against finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Relative error tolerance per coordinate.
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
        /// Negative control: sign-flip the IPA gradient.
        #[arg(long, hide = true)]
        corrupt_ipa: bool,
    },
}

fn options(c: &Common, iters: Option<usize>) -> CommandOptions {
    if let Some(seed) = c.seed {
        log::info!("seed {seed} ignored: runs are deterministic");
    }
    CommandOptions {
        scenario: c.scenario.clone(),
        out: c.out.clone(),
        params: c.params.clone(),
        mode: c.mode,
        iters,
        audit_events: c.audit_events,
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Simulate(c) => {
            let s = cmd_simulate(&options(&c, None))?;
            println!("J = {}", s.cost);
            Ok(true)
        }
        Command::Optimize { common, iters } => {
            let (_, s) = cmd_optimize(&options(&common, iters))?;
            println!(
                "J: {} -> {} after {} iterations ({:?})",
                s.initial_cost, s.final_cost, s.iterations, s.termination
            );
            Ok(true)
        }
        Command::Gradcheck {
            common,
            tol,
            corrupt_ipa,
        } => {
            let report = cmd_gradcheck(&options(&common, None), tol, corrupt_ipa)?;
            print!("{}", report.table());
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("PERSIMON_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("PERSIMON_THREADS ignored: {e}");
        }
    }
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
