//! `freeshap` command-line interface.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use commands::{PartialRun, RunContext};

#[derive(Parser, Debug)]
#[command(name = "freeshap", version, about = "Shapley-value data valuation over a precomputed kernel")]
struct Cli {
    /// JSON file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (falls back to $FREESHAP_OUT_DIR, then the config file, then `.`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every training point.
    Valuate(ValuateArgs),
    /// Sign robustness of Shapley and leave-one-out under dataset resampling.
    Robustness(RobustnessArgs),
    /// Accuracy while removing points in score order.
    Removal(RemovalArgs),
    /// Held-out accuracy when training on the top-scored points.
    Select(SelectArgs),
    /// Flip labels, score, and trace how fast the flips are found.
    Mislabel(MislabelArgs),
    /// Pearson and Spearman correlation of two score files.
    Corr(CorrArgs),
    /// Build a linear or RBF kernel file from feature columns.
    SynthKernel(SynthKernelArgs),
    /// Write a synthetic train / test / held-out benchmark.
    SynthData(SynthDataArgs),
    /// Print the header of a kernel file.
    KernelInfo(KernelInfoArgs),
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long)]
    pub train_labels: PathBuf,
    /// Labels of the kernel's test rows, in row order.
    #[arg(long)]
    pub test_labels: PathBuf,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// exact, freeshap, tmc or loo [default: tmc]
    #[arg(long)]
    pub method: Option<String>,
    /// Permutations [default: 200]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Truncation tolerance [default: 0.05]
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ValuateArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub sample: SampleArgs,
    /// `all`, a test id, or `@file.csv` listing test ids [default: all]
    #[arg(long)]
    pub target: Option<String>,
    /// constant-class-0 or uniform-expected [default: constant-class-0]
    #[arg(long)]
    pub empty_policy: Option<String>,
}

#[derive(Args, Debug)]
pub struct RobustnessArgs {
    /// JSON distribution (`means`, `scale`, `flip_prob`) [default: two Gaussians at ±e1, d=10]
    #[arg(long)]
    pub dist_config: Option<PathBuf>,
    /// Companion datasets per point [default: 5]
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Target points [default: 50]
    #[arg(long)]
    pub pool: Option<usize>,
    /// Dataset size including the target point [default: 200]
    #[arg(long)]
    pub n: Option<usize>,
    /// Test points [default: 200]
    #[arg(long)]
    pub test_size: Option<usize>,
    /// RBF bandwidth [default: the distribution's scale]
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Permutations per Shapley estimate [default: 200]
    #[arg(long)]
    pub iters: Option<usize>,
    /// [default: 0.05]
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub empty_policy: Option<String>,
}

#[derive(Args, Debug)]
pub struct RemovalArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Score CSV written by `valuate`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Fraction removed per level [default: 0.1]
    #[arg(long)]
    pub step: Option<f64>,
    /// high-first, low-first or both [default: both]
    #[arg(long)]
    pub direction: Option<String>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub empty_policy: Option<String>,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Held-out labels; ids must be test rows of the kernel outside the target.
    #[arg(long)]
    pub heldout_labels: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    /// Comma-separated training fractions [default: 0.1,0.2,...,1.0]
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub empty_policy: Option<String>,
}

#[derive(Args, Debug)]
pub struct MislabelArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub sample: SampleArgs,
    /// Fraction of labels flipped [default: 0.10]
    #[arg(long)]
    pub flip: Option<f64>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub empty_policy: Option<String>,
}

#[derive(Args, Debug)]
pub struct CorrArgs {
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthKernelArgs {
    /// Training CSV with feature columns.
    #[arg(long)]
    pub train_labels: PathBuf,
    /// Test-row CSV with feature columns.
    #[arg(long)]
    pub test_labels: PathBuf,
    /// linear or rbf [default: rbf]
    #[arg(long)]
    pub kind: Option<String>,
    /// [default: 1.0]
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SynthDataArgs {
    #[arg(long)]
    pub dist_config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n_train: usize,
    /// Target test points [default: 500]
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub n_heldout: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct KernelInfoArgs {
    pub kernel: PathBuf,
    /// Also load the payload and report symmetry and scale.
    #[arg(long)]
    pub check: bool,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = || RunContext::new(cli.config.as_deref(), cli.out.clone());
    match cli.command {
        Command::Valuate(a) => commands::valuate(&ctx()?, a),
        Command::Robustness(a) => commands::robustness(&ctx()?, a),
        Command::Removal(a) => commands::removal(&ctx()?, a),
        Command::Select(a) => commands::select(&ctx()?, a),
        Command::Mislabel(a) => commands::mislabel(&ctx()?, a),
        Command::Corr(a) => commands::corr(a),
        Command::SynthKernel(a) => commands::synth_kernel_cmd(&ctx()?, a),
        Command::SynthData(a) => commands::synth_data(&ctx()?, a),
        Command::KernelInfo(a) => commands::kernel_info(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().any(|cause| {
        cause.downcast_ref::<PartialRun>().is_some()
            || cause.downcast_ref::<freeshap::Error>().is_some_and(freeshap::Error::is_numerical)
    });
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.workers {
        Some(0) => Err(anyhow::anyhow!("--workers must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| run(cli))),
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
