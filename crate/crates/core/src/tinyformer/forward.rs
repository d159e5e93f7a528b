use super::params::*;
use super::positional::sinusoidal_positional_encoding;
use super::spec::{Activation, Arch, ArchKind, DecoderSpec, EncoderClassifierSpec};
use super::TransformerParams;
use crate::error::{Error, Result};
use crate::numerics::{Graph, Matrix, Var};

/// Switches used by tests and diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardOptions {
    /// Skip adding the positional encoding.
    pub zero_positional: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `1 × classes` for the encoder, `rows × vocab` for the decoder.
    pub logits: Matrix,
    /// Attention probabilities indexed `[layer][head]`, each `rows × rows`.
    pub attention: Vec<Vec<Matrix>>,
}

pub(crate) struct Built {
    pub params: Vec<Var>,
    pub hidden: Var,
    pub logits: Option<Var>,
    pub attention: Vec<Vec<Var>>,
}

fn check_input(arch: &Arch, z: &Matrix) -> Result<()> {
    let rows_ok = match arch.kind {
        ArchKind::Encoder => z.rows() == arch.seq_len,
        ArchKind::Decoder => (1..=arch.seq_len).contains(&z.rows()),
    };
    if !rows_ok || z.cols() != arch.input_dim {
        return Err(Error::shape(format!(
            "{:?} with seq_len {} and width {} got input {:?}",
            arch.kind,
            arch.seq_len,
            arch.input_dim,
            z.shape()
        )));
    }
    Ok(())
}

/// Records the forward pass for `z` on `g`; the head is skipped when
/// `with_head` is false.
pub(crate) fn build<'p>(
    g: &mut Graph<'p>,
    arch: &Arch,
    tensors: &'p [Matrix],
    z: &Matrix,
    opts: ForwardOptions,
    with_head: bool,
) -> Result<Built> {
    check_input(arch, z)?;
    let p: Vec<Var> = tensors.iter().map(|m| g.param(m)).collect();
    let input = if opts.zero_positional {
        z.clone()
    } else {
        let pe = sinusoidal_positional_encoding(z.rows(), z.cols())?;
        z.add(&pe)?
    };
    let mut x = g.constant(input);
    let causal = arch.kind == ArchKind::Decoder;
    let dh = arch.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut attention = Vec::with_capacity(arch.layers);

    for l in 0..arch.layers {
        let w = |slot: usize| p[l * LAYER_TENSORS + slot];

        let a = g.layer_norm(x, w(LN1_G), w(LN1_B))?;
        let q = g.matmul(a, w(WQ))?;
        let q = g.add_bias(q, w(BQ))?;
        let k = g.matmul(a, w(WK))?;
        let k = g.add_bias(k, w(BK))?;
        let v = g.matmul(a, w(WV))?;
        let v = g.add_bias(v, w(BV))?;
        let mut heads = Vec::with_capacity(arch.heads);
        let mut probs = Vec::with_capacity(arch.heads);
        for h in 0..arch.heads {
            let qh = g.slice_cols(q, h * dh, dh)?;
            let kh = g.slice_cols(k, h * dh, dh)?;
            let vh = g.slice_cols(v, h * dh, dh)?;
            let s = g.matmul_t(qh, kh)?;
            let s = g.scale(s, scale);
            let pr = g.softmax_rows(s, causal)?;
            heads.push(g.matmul(pr, vh)?);
            probs.push(pr);
        }
        attention.push(probs);
        let o = g.concat_cols(&heads)?;
        let o = g.matmul(o, w(WO))?;
        let o = g.add_bias(o, w(BO))?;
        x = g.add(x, o)?;

        let f = g.layer_norm(x, w(LN2_G), w(LN2_B))?;
        let f = g.matmul(f, w(W1))?;
        let f = g.add_bias(f, w(B1))?;
        let f = match arch.activation {
            Activation::Relu => g.relu(f),
            Activation::Gelu => g.gelu(f),
        };
        let f = g.matmul(f, w(W2))?;
        let f = g.add_bias(f, w(B2))?;
        x = g.add(x, f)?;
    }

    let logits = if with_head {
        let head_w = p[arch.layers * LAYER_TENSORS];
        let head_b = p[arch.layers * LAYER_TENSORS + 1];
        let pooled = match arch.kind {
            ArchKind::Encoder => g.mean_rows(x),
            ArchKind::Decoder => x,
        };
        let y = g.matmul(pooled, head_w)?;
        Some(g.add_bias(y, head_b)?)
    } else {
        None
    };
    Ok(Built {
        params: p,
        hidden: x,
        logits,
        attention,
    })
}

/// Full forward pass for either architecture.
pub fn forward(params: &TransformerParams, z: &Matrix, opts: ForwardOptions) -> Result<ForwardOutput> {
    let mut g = Graph::new();
    let b = build(&mut g, params.arch(), params.tensors(), z, opts, true)?;
    let logits = g.value(b.logits.expect("head requested")).clone();
    let attention = b
        .attention
        .iter()
        .map(|layer| layer.iter().map(|&v| g.value(v).clone()).collect())
        .collect();
    Ok(ForwardOutput { logits, attention })
}

/// Class logits for one `seq_len × input_dim` sequence.
pub fn encoder_forward(spec: &EncoderClassifierSpec, params: &TransformerParams, z: &Matrix) -> Result<Vec<f64>> {
    params.expect_arch(&spec.arch())?;
    Ok(forward(params, z, ForwardOptions::default())?.logits.row(0).to_vec())
}

/// Next-token logits for every position of `z` (at most `seq_len` rows).
pub fn decoder_forward(spec: &DecoderSpec, params: &TransformerParams, z: &Matrix) -> Result<Matrix> {
    params.expect_arch(&spec.arch())?;
    Ok(forward(params, z, ForwardOptions::default())?.logits)
}

/// Decoder logits for the last row of `z` only, skipping the head for the
/// earlier positions.
pub(crate) fn last_position_logits(params: &TransformerParams, z: &Matrix) -> Result<Vec<f64>> {
    let arch = params.arch();
    let mut g = Graph::new();
    let b = build(&mut g, arch, params.tensors(), z, ForwardOptions::default(), false)?;
    let hidden = g.value(b.hidden);
    let last = Matrix::row_vector(hidden.row(hidden.rows() - 1));
    let head_w = &params.tensors()[arch.layers * LAYER_TENSORS];
    let head_b = &params.tensors()[arch.layers * LAYER_TENSORS + 1];
    Ok(last.matmul(head_w)?.add(head_b)?.into_vec())
}

/// Mean cross-entropy for `z` against `targets` (one per logit row) and the
/// gradient of every parameter tensor.
pub fn loss_and_gradients(
    params: &TransformerParams,
    z: &Matrix,
    targets: &[Option<usize>],
) -> Result<(f64, Vec<Matrix>)> {
    loss_and_grads(params.arch(), params.tensors(), z, targets)
}

pub(crate) fn loss_and_grads(
    arch: &Arch,
    tensors: &[Matrix],
    z: &Matrix,
    targets: &[Option<usize>],
) -> Result<(f64, Vec<Matrix>)> {
    let mut g = Graph::new();
    let b = build(&mut g, arch, tensors, z, ForwardOptions::default(), true)?;
    let loss = g.cross_entropy(b.logits.expect("head requested"), targets)?;
    let mut grads = g.backward(loss);
    let out = b
        .params
        .iter()
        .zip(tensors)
        .map(|(&v, m)| grads.take_or_zeros(v, m.shape()))
        .collect();
    Ok((g.scalar(loss), out))
}
