//! `elastic-shape` pipeline driver.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "elastic-shape",
    version,
    about = "Elastic shape analysis of spherically parameterized surfaces"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// JSON config for the subcommand; missing fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if needed.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Grid size as `<n_u>x<n_v>`, overriding the config.
    #[arg(long, global = true, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (u, v) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected <n_u>x<n_v>, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(u)?, parse(v)?))
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reparameterization simulation: distance matrices, MDS and 1-NN accuracy.
    Simulate,
    /// Register one surface onto another.
    Register(commands::RegisterArgs),
    /// Karcher mean of a set of surfaces.
    Mean(commands::MeanArgs),
    /// Shape PCA of registered surfaces.
    Pca(commands::PcaArgs),
    /// Principal scores and reconstruction errors.
    Scores(commands::ScoresArgs),
    /// Frames along a principal direction as OBJ meshes.
    ExportPath(commands::ExportPathArgs),
    /// The ten-model regression suite.
    Regress(commands::RegressArgs),
    /// Elastic versus vertex-wise class separation.
    Compare,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Simulate => commands::simulate(g),
        Command::Register(a) => commands::register(g, a),
        Command::Mean(a) => commands::mean(g, a),
        Command::Pca(a) => commands::pca(g, a),
        Command::Scores(a) => commands::scores(g, a),
        Command::ExportPath(a) => commands::export_path(g, a),
        Command::Regress(a) => commands::regress(g, a),
        Command::Compare => commands::compare(g),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
