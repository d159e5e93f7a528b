use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use strucpca::embedding_io::{read_blocks, Vocabulary};
use strucpca::eval::{emit_csv, LossCurve};
use strucpca::tinyformer::{generate, train_decoder, Activation, ArchKind, DecoderSpec, Prompt, TokenEmbeddingTable};
use strucpca::tinyformer::TransformerParams;
use strucpca::PcaBank;

use crate::config::{create_run_dir, RunConfig};
use crate::output::{write_summary, Summary};
use crate::text::{adam, fit_position_bank};

pub fn train_defaults() -> Vec<(&'static str, String)> {
    vec![
        ("blocks", "fixtures/decode_block.peb".into()),
        ("bank_blocks", "fixtures/classify_train.peb".into()),
        ("pca_k", "70".into()),
        ("layers", "2".into()),
        ("heads", "2".into()),
        ("ffn_hidden", "256".into()),
        ("vocab_size", "50257".into()),
        ("activation", "relu".into()),
        ("epochs", "40".into()),
        ("batch_size", "1".into()),
        ("lr", "0.003".into()),
        ("seed", "0".into()),
        ("out_dir", "runs".into()),
    ]
}

pub fn generate_defaults() -> Vec<(&'static str, String)> {
    vec![
        ("checkpoint", String::new()),
        ("bank", String::new()),
        ("blocks", "fixtures/decode_block.peb".into()),
        ("block", "0".into()),
        ("prompt_len", "10".into()),
        ("steps", "90".into()),
        ("vocab", "fixtures/vocab.tsv".into()),
        ("seed", "0".into()),
        ("out_dir", "runs".into()),
    ]
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let spec = DecoderSpec {
        input_dim: cfg.get("pca_k")?,
        layers: cfg.get("layers")?,
        heads: cfg.get("heads")?,
        ffn_hidden: cfg.get("ffn_hidden")?,
        vocab: cfg.get("vocab_size")?,
        activation: cfg.get::<Activation>("activation")?,
        ..DecoderSpec::default()
    };
    let training = adam(cfg)?;
    let blocks = read_blocks(&cfg.path("blocks"))?;
    let bank_path = cfg.path("bank_blocks");
    let bank = fit_position_bank(&read_blocks(&bank_path)?, spec.input_dim, &bank_path)?;
    spec.validate().context("decoder configuration")?;
    let run_dir = create_run_dir(cfg, "decode-train")?;

    let (params, report) = train_decoder(&spec, &blocks, &bank, &training)?;
    println!("params={}", report.param_count);
    println!("train_accuracy={:.4}", report.train_accuracy);
    println!("final_loss={:.6}", report.final_loss().unwrap_or(f64::NAN));
    println!("train_seconds={:.3}", report.train_seconds);

    let checkpoint = run_dir.join("decoder.tfm");
    params.save(&checkpoint)?;
    bank.save(&run_dir.join("bank.pcb"))?;
    emit_csv(&LossCurve { losses: report.loss_curve.clone() }, &run_dir.join("loss.csv"))?;
    let mut s = Summary::new();
    s.push("params", report.param_count);
    s.push("train_accuracy", report.train_accuracy);
    s.push("blocks", blocks.len());
    s.push("steps", report.steps);
    s.push("train_seconds", report.train_seconds);
    write_summary(&run_dir, &s)?;
    println!("checkpoint={}", checkpoint.display());
    Ok(())
}

pub fn run_generate(cfg: &RunConfig) -> Result<()> {
    let checkpoint = cfg.path("checkpoint");
    if checkpoint.as_os_str().is_empty() {
        bail!("no checkpoint given (set checkpoint=<run dir>/decoder.tfm)");
    }
    let params = TransformerParams::load(&checkpoint)?;
    let a = params.arch();
    if a.kind != ArchKind::Decoder {
        bail!("{} holds an encoder, not a decoder", checkpoint.display());
    }
    let spec = DecoderSpec {
        input_dim: a.input_dim,
        seq_len: a.seq_len,
        layers: a.layers,
        heads: a.heads,
        ffn_hidden: a.ffn_hidden,
        vocab: a.outputs,
        activation: a.activation,
    };
    let bank_path = match cfg.raw("bank") {
        "" => checkpoint.with_file_name("bank.pcb"),
        p => PathBuf::from(p),
    };
    let bank = PcaBank::load(&bank_path)?;
    let blocks = read_blocks(&cfg.path("blocks"))?;
    let index: usize = cfg.get("block")?;
    let block = blocks
        .get(index)
        .ok_or_else(|| anyhow!("block {index} requested but {} holds {}", cfg.raw("blocks"), blocks.len()))?;
    let prompt = Prompt::from_block(block, cfg.get("prompt_len")?)?;
    let table = TokenEmbeddingTable::from_blocks(&blocks);
    let run_dir = create_run_dir(cfg, "decode-generate")?;

    let ids = generate(&spec, &params, &bank, &prompt, cfg.get("steps")?, &table)?;
    let reference = &block.token_ids()[..ids.len()];
    let matched = ids.iter().zip(reference).filter(|(a, b)| a == b).count();
    let id_text: Vec<String> = ids.iter().map(u32::to_string).collect();
    println!("ids={}", id_text.join(" "));
    println!("matches_block={matched}/{}", ids.len());
    std::fs::write(run_dir.join("generated.txt"), id_text.join(" ") + "\n").context("writing generated ids")?;

    let vocab_path = cfg.path("vocab");
    if vocab_path.is_file() {
        let text = Vocabulary::load(&vocab_path)?.decode(&ids);
        println!("text={text:?}");
        std::fs::write(run_dir.join("generated_text.txt"), &text).context("writing generated text")?;
    }
    let mut s = Summary::new();
    s.push("tokens", ids.len());
    s.push("prompt_len", prompt.len());
    s.push("matches_block", matched);
    write_summary(&run_dir, &s)
}
