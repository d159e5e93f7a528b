use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Hidden nonlinearity of the feed-forward sublayer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Gelu,
}

impl Activation {
    pub fn label(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Gelu => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Gelu),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            _ => Err(Error::param(format!("unknown activation {s:?} (expected relu or gelu)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    /// Bidirectional attention, mean-pooled, one logit row per sequence.
    Encoder,
    /// Causal attention, one logit row per position.
    Decoder,
}

/// Shape of either transformer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    pub kind: ArchKind,
    pub input_dim: usize,
    pub seq_len: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_hidden: usize,
    /// Classes for the encoder, vocabulary size for the decoder.
    pub outputs: usize,
    pub activation: Activation,
}

impl Arch {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("seq_len", self.seq_len),
            ("layers", self.layers),
            ("heads", self.heads),
            ("ffn_hidden", self.ffn_hidden),
            ("outputs", self.outputs),
        ] {
            if v == 0 {
                return Err(Error::param(format!("{name} must be positive")));
            }
        }
        if self.input_dim % 2 != 0 {
            return Err(Error::param(format!(
                "input_dim {} must be even for sinusoidal positions",
                self.input_dim
            )));
        }
        if self.input_dim % self.heads != 0 {
            return Err(Error::param(format!(
                "input_dim {} is not divisible by {} heads",
                self.input_dim, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.input_dim / self.heads
    }
}

/// Encoder classifier sizes; defaults give 77,976 parameters.
pub const ENCODER_PARAM_TARGET: usize = 81_000;
/// Accepted relative distance from [`ENCODER_PARAM_TARGET`].
pub const ENCODER_PARAM_TOLERANCE: f64 = 0.15;
/// Exclusive upper bound for the default decoder.
pub const DECODER_PARAM_LIMIT: usize = 3_800_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderClassifierSpec {
    pub input_dim: usize,
    pub seq_len: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_hidden: usize,
    pub classes: usize,
    pub activation: Activation,
}

impl Default for EncoderClassifierSpec {
    fn default() -> Self {
        Self {
            input_dim: 70,
            seq_len: 100,
            layers: 2,
            heads: 2,
            ffn_hidden: 128,
            classes: 20,
            activation: Activation::Relu,
        }
    }
}

impl EncoderClassifierSpec {
    pub fn arch(&self) -> Arch {
        Arch {
            kind: ArchKind::Encoder,
            input_dim: self.input_dim,
            seq_len: self.seq_len,
            layers: self.layers,
            heads: self.heads,
            ffn_hidden: self.ffn_hidden,
            outputs: self.classes,
            activation: self.activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderSpec {
    pub input_dim: usize,
    pub seq_len: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_hidden: usize,
    pub vocab: usize,
    pub activation: Activation,
}

impl Default for DecoderSpec {
    fn default() -> Self {
        Self {
            input_dim: 70,
            seq_len: 100,
            layers: 2,
            heads: 2,
            ffn_hidden: 256,
            vocab: 50_257,
            activation: Activation::Relu,
        }
    }
}

impl DecoderSpec {
    /// Same stack fed uncompressed 384-d embeddings, with a 4·d feed-forward width.
    pub fn full_width(layers: usize) -> Self {
        Self {
            input_dim: 384,
            ffn_hidden: 4 * 384,
            layers,
            ..Self::default()
        }
    }

    pub fn arch(&self) -> Arch {
        Arch {
            kind: ArchKind::Decoder,
            input_dim: self.input_dim,
            seq_len: self.seq_len,
            layers: self.layers,
            heads: self.heads,
            ffn_hidden: self.ffn_hidden,
            outputs: self.vocab,
            activation: self.activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch().validate()
    }
}
