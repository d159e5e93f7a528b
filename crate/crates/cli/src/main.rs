//! `strucpca`: structured-PCA compression pipelines from the command line.
//!
//! Every run resolves defaults, then an optional `key=value` config file,
//! then `--set` pairs and named flags, prints the result and writes its
//! artifacts to a fresh run directory. Exit status: 0 success, 1 pipeline
//! error, 2 usage error.

mod config;
mod decode;
mod mnist;
mod output;
mod sweep;
mod text;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use strucpca::embedding_io::validate_fixture;

use config::{RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "strucpca", version, about = "Structured PCA compression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key=value` config file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Parent of the per-run output directory
    #[arg(long)]
    out_dir: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Polar PCA features and a small classifier on MNIST
    Mnist(MnistArgs),
    /// Encoder classifier on compressed embedding blocks
    TextClassify(TextArgs),
    /// Next-token decoder on compressed embedding blocks
    Decode {
        #[command(subcommand)]
        mode: DecodeMode,
    },
    /// Curves over PCA rank, model depth or training-set size
    Sweep {
        #[command(subcommand)]
        kind: SweepKind,
    },
    /// Check a PEB1 file (and its manifest) against the format invariants
    ValidateFixture {
        path: PathBuf,
    },
}

#[derive(Args)]
struct MnistArgs {
    #[command(flatten)]
    common: Common,
    /// Directory with the four MNIST IDX files
    #[arg(long)]
    data_dir: Option<String>,
    /// linear | mlp3
    #[arg(long)]
    classifier: Option<String>,
    #[arg(long)]
    train_samples: Option<String>,
    #[arg(long)]
    pca_k: Option<String>,
    #[arg(long)]
    radial_bins: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
}

#[derive(Args)]
struct TextArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    train: Option<String>,
    #[arg(long)]
    test: Option<String>,
    #[arg(long)]
    pca_k: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
}

#[derive(Subcommand)]
enum DecodeMode {
    /// Train on blocks and save a checkpoint
    Train(DecodeTrainArgs),
    /// Greedy continuation of a block prefix from a checkpoint
    Generate(DecodeGenerateArgs),
}

#[derive(Args)]
struct DecodeTrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    blocks: Option<String>,
    /// Blocks the per-position PCA bank is fitted on
    #[arg(long)]
    bank_blocks: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
}

#[derive(Args)]
struct DecodeGenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    prompt_len: Option<String>,
    #[arg(long)]
    steps: Option<String>,
}

#[derive(Subcommand)]
enum SweepKind {
    /// Token match rate against PCA rank on a sentence pair
    Reconstruction(ReconstructionArgs),
    /// Decoder parameter totals against depth
    Params(ParamsArgs),
    /// MNIST accuracy and training time against training-set size
    Saturation(SaturationArgs),
}

#[derive(Args)]
struct ReconstructionArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    pair: Option<String>,
    /// Comma-separated ranks, strictly ascending
    #[arg(long)]
    ks: Option<String>,
    /// test | union
    #[arg(long)]
    pool: Option<String>,
}

#[derive(Args)]
struct ParamsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    depths: Option<String>,
}

#[derive(Args)]
struct SaturationArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data_dir: Option<String>,
    /// Comma-separated training-set sizes, strictly ascending
    #[arg(long)]
    counts: Option<String>,
}

fn resolve(
    name: &str,
    defaults: Vec<(&'static str, String)>,
    common: Common,
    mut flags: Vec<(&'static str, Option<String>)>,
) -> Result<RunConfig> {
    flags.push(("seed", common.seed));
    flags.push(("out_dir", common.out_dir));
    let cfg = RunConfig::resolve(defaults, common.config.as_deref(), &common.set, flags)?;
    cfg.announce(name);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mnist(a) => {
            let flags = vec![
                ("data_dir", a.data_dir),
                ("classifier", a.classifier),
                ("train_samples", a.train_samples),
                ("pca_k", a.pca_k),
                ("radial_bins", a.radial_bins),
                ("epochs", a.epochs),
                ("lr", a.lr),
            ];
            mnist::run(&resolve("mnist", mnist::defaults(), a.common, flags)?)
        }
        Command::TextClassify(a) => {
            let flags = vec![
                ("train", a.train),
                ("test", a.test),
                ("pca_k", a.pca_k),
                ("epochs", a.epochs),
                ("lr", a.lr),
            ];
            text::run(&resolve("text-classify", text::defaults(), a.common, flags)?)
        }
        Command::Decode { mode: DecodeMode::Train(a) } => {
            let flags = vec![
                ("blocks", a.blocks),
                ("bank_blocks", a.bank_blocks),
                ("epochs", a.epochs),
                ("lr", a.lr),
            ];
            decode::train(&resolve("decode train", decode::train_defaults(), a.common, flags)?)
        }
        Command::Decode { mode: DecodeMode::Generate(a) } => {
            let flags = vec![
                ("checkpoint", a.checkpoint),
                ("blocks", a.blocks),
                ("prompt_len", a.prompt_len),
                ("steps", a.steps),
            ];
            decode::run_generate(&resolve("decode generate", decode::generate_defaults(), a.common, flags)?)
        }
        Command::Sweep { kind: SweepKind::Reconstruction(a) } => {
            let flags = vec![("pair", a.pair), ("ks", a.ks), ("pool", a.pool)];
            let cfg = resolve("sweep reconstruction", sweep::reconstruction_defaults(), a.common, flags)?;
            sweep::reconstruction(&cfg)
        }
        Command::Sweep { kind: SweepKind::Params(a) } => {
            let cfg = resolve("sweep params", sweep::params_defaults(), a.common, vec![("depths", a.depths)])?;
            sweep::params(&cfg)
        }
        Command::Sweep { kind: SweepKind::Saturation(a) } => {
            let flags = vec![("data_dir", a.data_dir), ("counts", a.counts)];
            mnist::sweep(&resolve("sweep saturation", mnist::saturation_defaults(), a.common, flags)?)
        }
        Command::ValidateFixture { path } => {
            let report = validate_fixture(&path)?;
            print!("{report}");
            if !report.is_ok() {
                anyhow::bail!("{} failed validation", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
