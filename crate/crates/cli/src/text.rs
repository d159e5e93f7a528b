use std::path::Path;

use anyhow::{bail, Context, Result};
use strucpca::embedding_io::{blocks_to_tensor, read_blocks, EmbeddingBlock, EMBED_DIM};
use strucpca::eval::{emit_csv, LossCurve};
use strucpca::pca::bank_fit;
use strucpca::tinyformer::{
    block_labels, compress_blocks, encoder_accuracy, train_encoder_classifier, Activation, EncoderClassifierSpec,
};
use strucpca::{OptimizerKind, PcaBank, SegmentAxis, TrainingConfig};

use crate::config::{create_run_dir, RunConfig};
use crate::output::{write_summary, Summary};

pub fn defaults() -> Vec<(&'static str, String)> {
    vec![
        ("train", "fixtures/classify_train.peb".into()),
        ("test", "fixtures/classify_test.peb".into()),
        ("pca_k", "70".into()),
        ("layers", "2".into()),
        ("heads", "2".into()),
        ("ffn_hidden", "128".into()),
        ("classes", "20".into()),
        ("activation", "relu".into()),
        ("epochs", "30".into()),
        ("batch_size", "8".into()),
        ("lr", "0.0003".into()),
        ("seed", "0".into()),
        ("out_dir", "runs".into()),
    ]
}

pub fn adam(cfg: &RunConfig) -> Result<TrainingConfig> {
    Ok(TrainingConfig {
        seed: cfg.seed(),
        epochs: cfg.get("epochs")?,
        batch_size: cfg.get("batch_size")?,
        learning_rate: cfg.get("lr")?,
        optimizer: OptimizerKind::ADAM,
    })
}

/// Per-position bank over `blocks`, refusing ranks the data cannot support.
pub fn fit_position_bank(blocks: &[EmbeddingBlock], k: usize, source: &Path) -> Result<PcaBank> {
    let limit = blocks.len().saturating_sub(1).min(EMBED_DIM);
    if k == 0 || k > limit {
        bail!(
            "pca_k={k} must lie in 1..=min(N-1, D) = {limit} for {} blocks of width {EMBED_DIM} in {}",
            blocks.len(),
            source.display()
        );
    }
    Ok(bank_fit(&blocks_to_tensor(blocks)?, k, SegmentAxis::TokenPosition)?)
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let k: usize = cfg.get("pca_k")?;
    let spec = EncoderClassifierSpec {
        input_dim: k,
        layers: cfg.get("layers")?,
        heads: cfg.get("heads")?,
        ffn_hidden: cfg.get("ffn_hidden")?,
        classes: cfg.get("classes")?,
        activation: cfg.get::<Activation>("activation")?,
        ..EncoderClassifierSpec::default()
    };
    let training = adam(cfg)?;
    let (train_path, test_path) = (cfg.path("train"), cfg.path("test"));
    let train = read_blocks(&train_path)?;
    let test = read_blocks(&test_path)?;
    let bank = fit_position_bank(&train, k, &train_path)?;
    spec.validate().context("encoder configuration")?;
    let run_dir = create_run_dir(cfg, "text-classify")?;

    let (params, report) = train_encoder_classifier(&spec, &train, &bank, &training)?;
    let test_labels = block_labels(&test)?;
    let accuracy = encoder_accuracy(&params, &compress_blocks(&test, &bank)?, &test_labels)?;
    println!("params={}", report.param_count);
    println!("accuracy={accuracy:.4}");
    println!("train_accuracy={:.4}", report.train_accuracy);
    println!("train_seconds={:.3}", report.train_seconds);

    params.save(&run_dir.join("encoder.tfm"))?;
    bank.save(&run_dir.join("bank.pcb"))?;
    emit_csv(&LossCurve { losses: report.loss_curve.clone() }, &run_dir.join("loss.csv"))?;
    let mut s = Summary::new();
    s.push("params", report.param_count);
    s.push("test_accuracy", accuracy);
    s.push("train_accuracy", report.train_accuracy);
    s.push("train_blocks", train.len());
    s.push("test_blocks", test.len());
    s.push("train_seconds", report.train_seconds);
    write_summary(&run_dir, &s)
}
