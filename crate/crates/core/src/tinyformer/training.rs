use super::forward::{forward, loss_and_grads, ForwardOptions};
use super::spec::{Arch, DecoderSpec, EncoderClassifierSpec};
use super::TransformerParams;
use crate::embedding_io::{blocks_to_tensor, EmbeddingBlock, BLOCK_TOKENS, EMBED_DIM};
use crate::error::{Error, Result};
use crate::numerics::{argmax, Matrix};
use crate::pca::{bank_transform, PcaBank, SegmentAxis};
use crate::train::{accuracy, minibatch_loop, DivergeUnit, TrainReport, TrainingConfig};

/// Per-position PCA scores of every block, one `T × k` matrix each.
pub fn compress_blocks(blocks: &[EmbeddingBlock], bank: &PcaBank) -> Result<Vec<Matrix>> {
    if bank.axis() != SegmentAxis::TokenPosition || bank.segments() != BLOCK_TOKENS || bank.dim() != EMBED_DIM {
        return Err(Error::param(format!(
            "expected a {BLOCK_TOKENS}-position {} bank over {EMBED_DIM}-d embeddings, got {} {} segments of width {}",
            SegmentAxis::TokenPosition,
            bank.segments(),
            bank.axis(),
            bank.dim()
        )));
    }
    if blocks.is_empty() {
        return Ok(Vec::new());
    }
    let z = bank_transform(bank, &blocks_to_tensor(blocks)?)?;
    Ok((0..z.samples()).map(|i| z.sample(i)).collect())
}

fn check_width(arch: &Arch, bank: &PcaBank) -> Result<()> {
    if bank.k() != arch.input_dim {
        return Err(Error::param(format!(
            "bank keeps {} components but the model expects {}",
            bank.k(),
            arch.input_dim
        )));
    }
    Ok(())
}

/// Runs the shared loop; each sample contributes its own mean loss and the
/// batch loss is the average over samples.
fn fit(
    arch: &Arch,
    inputs: &[Matrix],
    targets: &[Vec<Option<usize>>],
    cfg: &TrainingConfig,
    unit: DivergeUnit,
) -> Result<(TransformerParams, crate::train::LoopOutcome)> {
    let mut params = TransformerParams::init(*arch, cfg.seed)?;
    let outcome = minibatch_loop(params.tensors_mut(), inputs.len(), cfg, unit, |tensors, batch| {
        let mut total = 0.0;
        let mut sum: Option<Vec<Matrix>> = None;
        for &i in batch {
            let (loss, grads) = loss_and_grads(arch, tensors, &inputs[i], &targets[i])?;
            total += loss;
            match &mut sum {
                None => sum = Some(grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&grads) {
                        a.add_assign_unchecked(g);
                    }
                }
            }
        }
        let inv = 1.0 / batch.len() as f64;
        let grads = sum.unwrap_or_default().iter().map(|g| g.scale(inv)).collect();
        Ok((total * inv, grads))
    })?;
    Ok((params, outcome))
}

/// Trains the encoder on already-compressed sequences.
pub fn train_encoder_on_inputs(
    spec: &EncoderClassifierSpec,
    inputs: &[Matrix],
    labels: &[usize],
    cfg: &TrainingConfig,
) -> Result<(TransformerParams, TrainReport)> {
    spec.validate()?;
    if inputs.len() != labels.len() {
        return Err(Error::shape(format!("{} inputs but {} labels", inputs.len(), labels.len())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= spec.classes) {
        return Err(Error::param(format!("label {l} outside 0..{}", spec.classes)));
    }
    let targets: Vec<Vec<Option<usize>>> = labels.iter().map(|&l| vec![Some(l)]).collect();
    let (params, outcome) = fit(&spec.arch(), inputs, &targets, cfg, DivergeUnit::Epoch)?;
    let train_accuracy = encoder_accuracy(&params, inputs, labels)?;
    let report = TrainReport {
        seed: cfg.seed,
        loss_curve: outcome.loss_curve,
        train_accuracy,
        test_accuracy: None,
        train_seconds: outcome.seconds,
        param_count: params.param_count(),
        steps: outcome.steps,
    };
    Ok((params, report))
}

/// Compresses labeled blocks through `bank` and trains the encoder on them.
pub fn train_encoder_classifier(
    spec: &EncoderClassifierSpec,
    blocks: &[EmbeddingBlock],
    bank: &PcaBank,
    cfg: &TrainingConfig,
) -> Result<(TransformerParams, TrainReport)> {
    check_width(&spec.arch(), bank)?;
    let labels = block_labels(blocks)?;
    let inputs = compress_blocks(blocks, bank)?;
    train_encoder_on_inputs(spec, &inputs, &labels, cfg)
}

pub fn block_labels(blocks: &[EmbeddingBlock]) -> Result<Vec<usize>> {
    blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            b.label()
                .map(|l| l as usize)
                .ok_or_else(|| Error::param(format!("block {i} has no label")))
        })
        .collect()
}

/// Arg-max class per sequence; ties go to the lower class index.
pub fn encoder_predict(params: &TransformerParams, inputs: &[Matrix]) -> Result<Vec<usize>> {
    inputs
        .iter()
        .map(|z| Ok(argmax(forward(params, z, ForwardOptions::default())?.logits.row(0))))
        .collect()
}

pub fn encoder_accuracy(params: &TransformerParams, inputs: &[Matrix], labels: &[usize]) -> Result<f64> {
    Ok(accuracy(&encoder_predict(params, inputs)?, labels))
}

/// Target at position `t` is the token at `t + 1`; the last position has none.
pub fn next_token_targets(ids: &[u32]) -> Vec<Option<usize>> {
    (0..ids.len())
        .map(|t| ids.get(t + 1).map(|&id| id as usize))
        .collect()
}

/// Trains the decoder on already-compressed sequences and their token ids.
pub fn train_decoder_on_inputs(
    spec: &DecoderSpec,
    inputs: &[Matrix],
    token_ids: &[Vec<u32>],
    cfg: &TrainingConfig,
) -> Result<(TransformerParams, TrainReport)> {
    spec.validate()?;
    if inputs.len() != token_ids.len() {
        return Err(Error::shape(format!(
            "{} inputs but {} id sequences",
            inputs.len(),
            token_ids.len()
        )));
    }
    for (i, (z, ids)) in inputs.iter().zip(token_ids).enumerate() {
        if z.rows() != ids.len() || ids.len() < 2 {
            return Err(Error::shape(format!(
                "sequence {i}: {} rows, {} ids (need equal and at least 2)",
                z.rows(),
                ids.len()
            )));
        }
        if let Some(&id) = ids.iter().find(|&&id| id as usize >= spec.vocab) {
            return Err(Error::param(format!("sequence {i}: token {id} outside vocabulary of {}", spec.vocab)));
        }
    }
    let targets: Vec<_> = token_ids.iter().map(|ids| next_token_targets(ids)).collect();
    let (params, outcome) = fit(&spec.arch(), inputs, &targets, cfg, DivergeUnit::Step)?;
    let train_accuracy = next_token_accuracy(&params, inputs, token_ids)?;
    let report = TrainReport {
        seed: cfg.seed,
        loss_curve: outcome.loss_curve,
        train_accuracy,
        test_accuracy: None,
        train_seconds: outcome.seconds,
        param_count: params.param_count(),
        steps: outcome.steps,
    };
    Ok((params, report))
}

/// Compresses blocks through `bank` and trains next-token prediction.
pub fn train_decoder(
    spec: &DecoderSpec,
    blocks: &[EmbeddingBlock],
    bank: &PcaBank,
    cfg: &TrainingConfig,
) -> Result<(TransformerParams, TrainReport)> {
    check_width(&spec.arch(), bank)?;
    let inputs = compress_blocks(blocks, bank)?;
    let ids: Vec<Vec<u32>> = blocks.iter().map(|b| b.token_ids().to_vec()).collect();
    train_decoder_on_inputs(spec, &inputs, &ids, cfg)
}

/// Fraction of positions `0..T−1` whose arg-max logit is the next token.
pub fn next_token_accuracy(params: &TransformerParams, inputs: &[Matrix], token_ids: &[Vec<u32>]) -> Result<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for (z, ids) in inputs.iter().zip(token_ids) {
        let logits = forward(params, z, ForwardOptions::default())?.logits;
        for (t, target) in next_token_targets(ids).into_iter().enumerate() {
            if let Some(target) = target {
                hits += usize::from(argmax(logits.row(t)) == target);
                total += 1;
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}
