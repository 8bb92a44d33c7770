use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rectilens::estimator::OptimizerConfig;
use rectilens::losses::PairSet;
use rectilens::{DistortionModel, ModelKind, ParamRange, IMAGE_SIZE};
use serde::{Deserialize, Serialize};

mod commands;
mod error;
mod io;
mod manifest;

use error::{CliError, CliResult};

/// Synthesize, estimate, rectify and evaluate radial lens distortion.
#[derive(Debug, Parser)]
#[command(name = "rectilens", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Build distorted groups from a directory of normal images.
    Synth(SynthArgs),
    /// Recover distortion parameters of every group in a manifest.
    Estimate(EstimateArgs),
    /// Rectify one image with a given or estimated parameter.
    Rectify(RectifyArgs),
    /// Score rectifications of every test set with every model.
    Eval(EvalArgs),
    /// Run the embedded property checks.
    Selftest(SelftestArgs),
    /// Re-run a command from a config echo file.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    /// Directory of normal images (PNG, JPEG, ...).
    #[arg(long, required_unless_present = "scenes", conflicts_with = "scenes")]
    pub in_dir: Option<PathBuf>,
    /// Use this many procedural scenes instead of an input directory.
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use at most this many input images (in file name order).
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = IMAGE_SIZE)]
    pub size: usize,
    /// Parameter range override, e.g. `DM=-1:-0.02`; repeatable.
    #[arg(long = "range", value_parser = parse_range)]
    pub ranges: Vec<DistortionModel>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 17)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 6)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub sweep_tol: f64,
    /// Seed for grid jitter.
    #[arg(long = "opt-seed", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub grid_jitter: bool,
    /// Skip the line search along each sweep's net displacement.
    #[arg(long)]
    pub no_pattern_moves: bool,
}

impl OptimizerArgs {
    pub fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            coarse_grid_points: self.grid_points,
            golden_section_tol: self.tol,
            max_sweeps: self.max_sweeps,
            sweep_tol: self.sweep_tol,
            seed: self.seed,
            grid_jitter: self.grid_jitter,
            pattern_moves: !self.no_pattern_moves,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `intra` or `intra+inter`.
    #[arg(long, default_value = "intra+inter")]
    pub loss: String,
    #[arg(long, default_value_t = PairSet::M4)]
    pub pairs: PairSet,
    /// Also write the per-step loss trace of every group.
    #[arg(long)]
    pub trace: bool,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RectifyArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Validity mask of the input; all pixels valid when omitted.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: ModelKind,
    /// Raw parameter; alternatively take it from `--estimate`.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "estimate", conflicts_with = "estimate")]
    pub k: Option<f64>,
    /// Estimation JSON written by `estimate`.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub slot: u8,
    #[arg(long = "range", value_parser = parse_range)]
    pub ranges: Vec<DistortionModel>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rectify with ground-truth parameters (supervised fits off the diagonal).
    #[arg(long, conflicts_with = "supervised")]
    pub use_true_k: bool,
    /// Fit every cell against the normal image.
    #[arg(long)]
    pub supervised: bool,
    /// Score the whole frame including invalid borders.
    #[arg(long)]
    pub full_frame: bool,
    #[arg(long, default_value = "intra+inter")]
    pub loss: String,
    #[arg(long, default_value_t = PairSet::M4)]
    pub pairs: PairSet,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SelftestArgs {
    /// Also write the result table as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scale applied to forward radii in the round-trip check (testing hook).
    #[arg(long, hide = true, default_value_t = 1.0)]
    pub corrupt_radial: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub config: PathBuf,
}

fn parse_range(s: &str) -> Result<DistortionModel, String> {
    let (name, bounds) = s.split_once('=').ok_or("expected MODEL=MIN:MAX")?;
    let kind: ModelKind = name.parse().map_err(|e: rectilens::Error| e.to_string())?;
    let (lo, hi) = bounds.split_once(':').ok_or("expected MODEL=MIN:MAX")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad range bound {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad range bound {hi:?}"))?;
    let range = ParamRange::new(lo, hi).map_err(|e| e.to_string())?;
    Ok(DistortionModel::new(kind, range))
}

/// Default ranges with overrides applied, in FOV, DM, ED order.
pub fn effective_models(overrides: &[DistortionModel]) -> Vec<DistortionModel> {
    ModelKind::ALL
        .iter()
        .map(|&kind| {
            overrides.iter().rev().copied().find(|m| m.kind == kind).unwrap_or_else(|| DistortionModel::with_default_range(kind))
        })
        .collect()
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("THREADS") else { return Ok(()) };
    let n: usize = value.trim().parse().map_err(|_| CliError::Usage(format!("THREADS must be a positive integer, got {value:?}")))?;
    if n == 0 {
        return Err(CliError::Usage("THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(args) => commands::synth(args),
        Command::Estimate(args) => commands::estimate(args),
        Command::Rectify(args) => commands::rectify(args),
        Command::Eval(args) => commands::eval(args),
        Command::Selftest(args) => commands::selftest(args),
        Command::Replay(args) => {
            let command: Command = io::read_json(&args.config)?;
            if matches!(command, Command::Replay(_)) {
                return Err(CliError::Usage("a config echo cannot replay another echo".into()));
            }
            run(command)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
