use std::ops::{Add, Mul};

use super::spec::{Arch, DecoderSpec, EncoderClassifierSpec};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::train::{init_rng, uniform_init};

/// Tensors per transformer layer, in storage order.
pub(crate) const LAYER_TENSORS: usize = 16;

pub(crate) const LN1_G: usize = 0;
pub(crate) const LN1_B: usize = 1;
pub(crate) const WQ: usize = 2;
pub(crate) const BQ: usize = 3;
pub(crate) const WK: usize = 4;
pub(crate) const BK: usize = 5;
pub(crate) const WV: usize = 6;
pub(crate) const BV: usize = 7;
pub(crate) const WO: usize = 8;
pub(crate) const BO: usize = 9;
pub(crate) const LN2_G: usize = 10;
pub(crate) const LN2_B: usize = 11;
pub(crate) const W1: usize = 12;
pub(crate) const B1: usize = 13;
pub(crate) const W2: usize = 14;
pub(crate) const B2: usize = 15;

const LAYER_NAMES: [&str; LAYER_TENSORS] = [
    "ln1.gamma",
    "ln1.beta",
    "attn.w_q",
    "attn.b_q",
    "attn.w_k",
    "attn.b_k",
    "attn.w_v",
    "attn.b_v",
    "attn.w_o",
    "attn.b_o",
    "ln2.gamma",
    "ln2.beta",
    "ffn.w_1",
    "ffn.b_1",
    "ffn.w_2",
    "ffn.b_2",
];

/// Parameter totals split by component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParamCount {
    pub attention: usize,
    pub ffn: usize,
    pub layer_norm: usize,
    pub output_projection: usize,
    pub total: usize,
}

impl ParamCount {
    fn new(attention: usize, ffn: usize, layer_norm: usize, output_projection: usize) -> Self {
        Self {
            attention,
            ffn,
            layer_norm,
            output_projection,
            total: attention + ffn + layer_norm + output_projection,
        }
    }
}

impl Add for ParamCount {
    type Output = ParamCount;

    fn add(self, o: ParamCount) -> ParamCount {
        ParamCount::new(
            self.attention + o.attention,
            self.ffn + o.ffn,
            self.layer_norm + o.layer_norm,
            self.output_projection + o.output_projection,
        )
    }
}

impl Mul<usize> for ParamCount {
    type Output = ParamCount;

    fn mul(self, n: usize) -> ParamCount {
        ParamCount::new(self.attention * n, self.ffn * n, self.layer_norm * n, self.output_projection * n)
    }
}

/// Any architecture whose parameters can be counted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Linear { inputs: usize, outputs: usize, bias: bool },
    /// Fully connected ReLU stack with biases; `dims` lists every layer width
    /// from input to output.
    Mlp { dims: Vec<usize> },
    Encoder(EncoderClassifierSpec),
    Decoder(DecoderSpec),
}

/// One transformer layer: attention, feed-forward and both layer norms.
pub fn layer_params(arch: &Arch) -> ParamCount {
    let (d, h) = (arch.input_dim, arch.ffn_hidden);
    ParamCount::new(4 * (d * d + d), d * h + h + h * d + d, 4 * d, 0)
}

fn stack_params(arch: &Arch) -> ParamCount {
    let head = ParamCount::new(0, 0, 0, arch.input_dim * arch.outputs + arch.outputs);
    layer_params(arch) * arch.layers + head
}

/// Closed-form parameter count.
pub fn count_params(spec: &ModelSpec) -> ParamCount {
    match spec {
        ModelSpec::Linear { inputs, outputs, bias } => {
            ParamCount::new(0, 0, 0, inputs * outputs + if *bias { *outputs } else { 0 })
        }
        ModelSpec::Mlp { dims } => {
            let dense = |w: &[usize]| w[0] * w[1] + w[1];
            match dims.len() {
                0 | 1 => ParamCount::default(),
                n => {
                    let hidden = dims[..n - 1].windows(2).map(dense).sum();
                    ParamCount::new(0, hidden, 0, dense(&dims[n - 2..]))
                }
            }
        }
        ModelSpec::Encoder(s) => stack_params(&s.arch()),
        ModelSpec::Decoder(s) => stack_params(&s.arch()),
    }
}

/// Name and shape of every tensor, in storage order.
pub fn tensor_layout(arch: &Arch) -> Vec<(String, (usize, usize))> {
    let (d, h, o) = (arch.input_dim, arch.ffn_hidden, arch.outputs);
    let layer_shapes = [
        (1, d),
        (1, d),
        (d, d),
        (1, d),
        (d, d),
        (1, d),
        (d, d),
        (1, d),
        (d, d),
        (1, d),
        (1, d),
        (1, d),
        (d, h),
        (1, h),
        (h, d),
        (1, d),
    ];
    let mut out = Vec::with_capacity(arch.layers * LAYER_TENSORS + 2);
    for l in 0..arch.layers {
        for (name, shape) in LAYER_NAMES.iter().zip(layer_shapes) {
            out.push((format!("layer{l}.{name}"), shape));
        }
    }
    out.push(("head.w".into(), (d, o)));
    out.push(("head.b".into(), (1, o)));
    out
}

/// Weights of one transformer stack together with the shape they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerParams {
    arch: Arch,
    tensors: Vec<Matrix>,
}

impl TransformerParams {
    /// Weights uniform in ±1/√fan_in, biases and layer-norm shifts zero,
    /// layer-norm gains one.
    pub fn init(arch: Arch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = init_rng(seed);
        let tensors = tensor_layout(&arch)
            .into_iter()
            .enumerate()
            .map(|(i, (_, (r, c)))| {
                let in_layer = i < arch.layers * LAYER_TENSORS;
                let slot = i % LAYER_TENSORS;
                if in_layer && (slot == LN1_G || slot == LN2_G) {
                    Matrix::filled(r, c, 1.0)
                } else if r == 1 {
                    Matrix::zeros(r, c)
                } else {
                    uniform_init(&mut rng, r, c, r)
                }
            })
            .collect();
        Ok(Self { arch, tensors })
    }

    pub fn from_tensors(arch: Arch, tensors: Vec<Matrix>) -> Result<Self> {
        arch.validate()?;
        let layout = tensor_layout(&arch);
        if layout.len() != tensors.len() {
            return Err(Error::shape(format!(
                "{} tensors for a layout of {}",
                tensors.len(),
                layout.len()
            )));
        }
        for ((name, shape), t) in layout.iter().zip(&tensors) {
            if t.shape() != *shape {
                return Err(Error::shape(format!("{name}: expected {shape:?}, got {:?}", t.shape())));
            }
        }
        Ok(Self { arch, tensors })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub(crate) fn expect_arch(&self, arch: &Arch) -> Result<()> {
        if self.arch != *arch {
            return Err(Error::param(format!(
                "parameters were built for {:?}, not {:?}",
                self.arch, arch
            )));
        }
        Ok(())
    }
}
