use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmbsn::mask::MaskShape;
use mmbsn::model::{ArchKind, ArchitectureConfig};
use mmbsn::noise::{CleanPattern, NoiseKernel};

mod commands;
mod error;

use error::CliError;

/// Multi-mask blind-spot denoiser: training, inference and verification tools.
#[derive(Debug, Parser)]
#[command(name = "mmbsn", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network on a directory of noisy PNG images (no clean targets).
    Train(TrainArgs),
    /// Denoise one PNG image with a trained checkpoint.
    Denoise(DenoiseArgs),
    /// Compare theoretical and measured blind-spot exclusion sets.
    VerifyBlindspot(VerifyArgs),
    /// Connected-component statistics of the residual between two images.
    AnalyzeNoise(AnalyzeArgs),
    /// Per-layer and total parameter counts.
    CountParams(CountArgs),
    /// Write a synthetic clean/noisy image pair (or a set of them).
    GenSynthetic(GenArgs),
    /// Convolution throughput and training-step latency.
    Bench(BenchArgs),
}

fn parse_arch(s: &str) -> Result<ArchKind, String> {
    s.parse().map_err(|e: mmbsn::Error| e.to_string())
}

fn parse_mask(s: &str) -> Result<MaskShape, String> {
    s.parse().map_err(|e: mmbsn::Error| e.to_string())
}

fn parse_kernel(s: &str) -> Result<NoiseKernel, String> {
    s.parse().map_err(|e: mmbsn::Error| e.to_string())
}

fn parse_pattern(s: &str) -> Result<CleanPattern, String> {
    s.parse().map_err(|e: mmbsn::Error| e.to_string())
}

/// Architecture flags shared by several subcommands.
#[derive(Debug, Args)]
struct ArchArgs {
    /// Network family: apbsn, smmbsn or mmbsn.
    #[arg(long, default_value = "mmbsn", value_parser = parse_arch)]
    arch: ArchKind,
    /// Comma separated mask tags (o, hbar, vbar, plus, slash, backslash, cross, square, squareplus, star).
    #[arg(long, default_value = "slash,backslash", value_delimiter = ',', value_parser = parse_mask)]
    masks: Vec<MaskShape>,
    /// Base channel width C [default: 128 for count-params, 8 for verify-blindspot, 16 for train].
    #[arg(long)]
    channels: Option<usize>,
    /// DCL blocks in each branch's CDCL.
    #[arg(long, default_value_t = 2)]
    cdcl_depth: usize,
    /// DCL blocks after the per-size fusion.
    #[arg(long, default_value_t = 7)]
    trunk_depth: usize,
    /// Masked-conv kernel sizes.
    #[arg(long, default_value = "3,5", value_delimiter = ',')]
    kernel_sizes: Vec<usize>,
    /// One dilation per kernel size.
    #[arg(long, default_value = "2,3", value_delimiter = ',')]
    dilations: Vec<usize>,
}

impl ArchArgs {
    fn config(&self, default_channels: usize) -> ArchitectureConfig {
        ArchitectureConfig {
            base_channels: self.channels.unwrap_or(default_channels),
            masks: self.masks.clone(),
            cdcl_depth: self.cdcl_depth,
            trunk_depth: self.trunk_depth,
            kernel_sizes: self.kernel_sizes.clone(),
            dilations: self.dilations.clone(),
            in_channels: 3,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory of noisy 8-bit RGB PNG files.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint path, rewritten after every epoch.
    #[arg(long, default_value = "model.ckpt")]
    out: PathBuf,
    /// TOML file with TrainingConfig fields; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the full-size defaults (C=128, 30 epochs, crop 128, PD 5) instead of the toy preset.
    #[arg(long)]
    full: bool,
    /// Network family: apbsn, smmbsn or mmbsn [default: mmbsn].
    #[arg(long, value_parser = parse_arch)]
    arch: Option<ArchKind>,
    /// Comma separated mask tags [default: slash,backslash].
    #[arg(long, value_delimiter = ',', value_parser = parse_mask)]
    masks: Option<Vec<MaskShape>>,
    /// Base channel width C.
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Optimizer steps per epoch.
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Square crop size.
    #[arg(long)]
    crop: Option<usize>,
    /// PD stride during training.
    #[arg(long)]
    pd_train: Option<usize>,
    /// PD stride recorded for inference.
    #[arg(long)]
    pd_test: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Noisy PNG.
    #[arg(long)]
    input: PathBuf,
    /// Output PNG.
    #[arg(long, default_value = "denoised.png")]
    output: PathBuf,
    /// Optional clean PNG; PSNR and SSIM against it are reported.
    #[arg(long)]
    clean: Option<PathBuf>,
    /// PD stride at inference.
    #[arg(long, default_value_t = 2)]
    pd_test: usize,
    /// Apply random-replacing refinement (the default).
    #[arg(long, overrides_with = "no_refine")]
    refine: bool,
    /// Skip refinement.
    #[arg(long)]
    no_refine: bool,
    /// Replacement probability for refinement.
    #[arg(long, default_value_t = 0.16)]
    refine_p: f64,
    /// Refinement passes.
    #[arg(long = "refine-T", default_value_t = 8)]
    refine_t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    arch: ArchArgs,
    /// Half-width of the offset window.
    #[arg(long, default_value_t = 6)]
    radius: i32,
    /// Random weight draws (at least 3).
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test hook: clear the centre tap of every mask.
    #[arg(long, hide = true)]
    unmask_center: bool,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Image A (e.g. the noisy input).
    #[arg(long)]
    input: PathBuf,
    /// Image B (e.g. the denoised output); the residual is A - B.
    #[arg(long)]
    reference: PathBuf,
    /// Binarization threshold on |residual| [default: 2 * robust noise std].
    #[arg(long)]
    threshold: Option<f64>,
    /// CSV destination [default: stdout].
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CountArgs {
    #[command(flatten)]
    arch: ArchArgs,
    /// Expected total; exit 1 when outside the tolerance.
    #[arg(long)]
    expect: Option<f64>,
    /// Relative tolerance for --expect.
    #[arg(long, default_value_t = 0.10)]
    tol: f64,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Clean pattern: stripes, checker, gradient or disks.
    #[arg(long, default_value = "checker", value_parser = parse_pattern)]
    pattern: CleanPattern,
    /// Noise kernels joined by '+': mask tags or iso.
    #[arg(long, default_value = "o", value_delimiter = '+', value_parser = parse_kernel)]
    noise: Vec<NoiseKernel>,
    /// Shaping kernel support (odd).
    #[arg(long, default_value_t = 5)]
    support: usize,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    /// Image side length.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Number of pairs; above 1 they go to clean/ and noisy/ subdirectories.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Feature map side length.
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 16)]
    channels: usize,
    /// Timed repetitions.
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("MMBSN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MMBSN_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Denoise(a) => commands::denoise(a),
        Command::VerifyBlindspot(a) => commands::verify(a),
        Command::AnalyzeNoise(a) => commands::analyze(a),
        Command::CountParams(a) => commands::count(a),
        Command::GenSynthetic(a) => commands::gen(a),
        Command::Bench(a) => commands::bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
