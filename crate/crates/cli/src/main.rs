use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use timechange_cli::{CliError, ExperimentConfig, RunSummary, Suite};

#[derive(Parser)]
#[command(name = "timechange", version, about = "Density, Monte-Carlo and decay-law suites for time-changed evolutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites listed in the config.
    Run(RunArgs),
    /// Run only the density suite.
    Density(RunArgs),
    /// Run only the Monte-Carlo suite.
    Simulate(RunArgs),
    /// Run only the decay-law verification suite.
    Verify(RunArgs),
    /// Classify a kernel and check admissibility.
    Info {
        /// Kernel JSON, inline or as a file path.
        kernel: String,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Monte-Carlo seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &RunArgs, only: Option<Suite>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(suite) = only {
        cfg.suites = vec![suite];
    }
    if let Some(out) = &args.out {
        cfg.outputs = out.clone();
    }
    if let (Some(seed), Some(mc)) = (args.seed, cfg.mc.as_mut()) {
        mc.seed = seed;
    }
    cfg.validate()
        .map_err(|msg| CliError::Config(format!("{}: {msg}", args.config.display())))?;
    Ok(cfg)
}

fn set_threads(threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        Some(0) => Err(CliError::Config("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string())),
        None => Ok(()),
    }
}

fn report(summary: &RunSummary) {
    for s in &summary.suites {
        println!("{:<14} passed {:>4}  failed {:>4}  skipped {:>4}", s.suite, s.passed, s.failed, s.skipped);
    }
    println!("status: {}", summary.status);
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    let (args, only) = match cli.command {
        Command::Info { kernel } => {
            let k = timechange_cli::parse_kernel_arg(&kernel)?;
            print!("{}", timechange_cli::info(&k)?);
            return Ok(0);
        }
        Command::Run(a) => (a, None),
        Command::Density(a) => (a, Some(Suite::Density)),
        Command::Simulate(a) => (a, Some(Suite::Mc)),
        Command::Verify(a) => (a, Some(Suite::Asymptotics)),
    };
    let cfg = load(&args, only)?;
    set_threads(args.threads)?;
    let summary = timechange_cli::run(&cfg)?;
    report(&summary);
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
