use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxk_qaoa::experiments::{run_with_threads, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "maxk-qaoa", version, about = "Weight-k subspace QAOA experiments for Max-k Vertex Cover")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config; fields not given fall back to the subcommand defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate the instance family as JSON lines.
    Gen,
    /// p = 1 expectation grids per graph and averaged.
    Heatmap,
    /// Dicke start against every classical weight-k start.
    InitialCompare,
    /// Ratio of best approximation ratios of two mixers.
    MixerCompare,
    /// Monte Carlo spread per level and samples needed to beat the previous level.
    StdDecay,
    /// Best-known angles per round.
    AnglePatterns,
    /// Monte Carlo, basin hopping and interpolation at equal budgets.
    StrategyCompare,
    /// Run the invariant suite.
    Verify,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Gen => ExperimentKind::Gen,
            Command::Heatmap => ExperimentKind::Heatmap,
            Command::InitialCompare => ExperimentKind::InitialCompare,
            Command::MixerCompare => ExperimentKind::MixerCompare,
            Command::StdDecay => ExperimentKind::StdDecay,
            Command::AnglePatterns => ExperimentKind::AnglePatterns,
            Command::StrategyCompare => ExperimentKind::StrategyCompare,
            Command::Verify => ExperimentKind::Verify,
        }
    }
}

fn report(code: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": { "code": code, "message": message } }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = ExperimentConfig::from_file(cli.command.kind(), cli.config.as_deref(), cli.seed)
        .and_then(|config| run_with_threads(&config, cli.threads))
        .and_then(|out| out.write_to(&cli.out_dir).map(|()| out));
    match result {
        Ok(out) if out.failures.is_empty() => {
            for f in &out.files {
                println!("{}", cli.out_dir.join(&f.name).display());
            }
            ExitCode::SUCCESS
        }
        Ok(out) => report("check-failed", &out.failures.join("; ")),
        Err(e) => report(e.code(), &e.to_string()),
    }
}

