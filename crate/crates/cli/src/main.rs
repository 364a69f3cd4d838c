use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ftsbench_cli::{run, CliError, ExperimentConfig, RunOptions, Stage};

#[derive(Parser)]
#[command(name = "ftsbench", version, about = "Benchmark conditional return generators on synthetic markets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured datasets.
    Generate(Common),
    /// Fit the parametric models.
    Fit(Common),
    /// Train the generative networks.
    Train(Common),
    /// Score every model on the test splits.
    Evaluate(Common),
    /// Run the straddle backtest.
    Backtest(Common),
    /// Write metric tables, ranks and the summary.
    Report(Common),
    /// Run every stage (or up to `--stage`).
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "report")]
        stage: Stage,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config file.
    #[arg(long, env = "FTSBENCH_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn execute(common: Common, until: Stage) -> Result<usize, CliError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be positive".into()));
    }
    let out_dir = common
        .out_dir
        .or_else(|| cfg.out_dir.as_ref().map(|p| common.config.parent().unwrap_or(std::path::Path::new(".")).join(p)))
        .unwrap_or_else(|| PathBuf::from("ftsbench-out"));
    let opts = RunOptions { out_dir: out_dir.clone(), jobs: common.jobs, until, quiet: common.quiet };
    let outcome = run(&cfg, &opts)?;
    println!(
        "{}: {} cell(s) executed, {} cached, {} failed; manifest at {}",
        until.name(),
        outcome.executed,
        outcome.skipped,
        outcome.failed,
        out_dir.join(ftsbench_cli::manifest::MANIFEST_FILE).display()
    );
    if until == Stage::Report {
        if let Ok(text) = std::fs::read_to_string(out_dir.join("report/summary.txt")) {
            print!("{text}");
        }
    }
    Ok(outcome.failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, until) = match cli.command {
        Command::Generate(c) => (c, Stage::Generate),
        Command::Fit(c) => (c, Stage::Fit),
        Command::Train(c) => (c, Stage::Train),
        Command::Evaluate(c) => (c, Stage::Evaluate),
        Command::Backtest(c) => (c, Stage::Backtest),
        Command::Report(c) => (c, Stage::Report),
        Command::Run { common, stage } => (common, stage),
    };
    match execute(common, until) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("ftsbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
