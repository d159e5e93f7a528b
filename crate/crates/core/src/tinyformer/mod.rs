//! Tiny transformer stacks over PCA-compressed token embeddings: a
//! mean-pooled encoder classifier and a causal next-token decoder.
//!
//! Layers are pre-norm: `x + Attn(LN(x))`, then `x + FFN(LN(x))`.

mod checkpoint;
mod forward;
mod generate;
mod params;
mod positional;
mod spec;
mod training;

pub use checkpoint::CHECKPOINT_MAGIC;
pub use forward::{decoder_forward, encoder_forward, forward, loss_and_gradients, ForwardOptions, ForwardOutput};
pub use generate::{generate, Prompt, TokenEmbeddingTable};
pub use params::{count_params, layer_params, tensor_layout, ModelSpec, ParamCount, TransformerParams};
pub use positional::{causal_mask, sinusoidal_positional_encoding, CausalMask};
pub use spec::{
    Activation, Arch, ArchKind, DecoderSpec, EncoderClassifierSpec, DECODER_PARAM_LIMIT, ENCODER_PARAM_TARGET,
    ENCODER_PARAM_TOLERANCE,
};
pub use training::{
    block_labels, compress_blocks, encoder_accuracy, encoder_predict, next_token_accuracy, next_token_targets,
    train_decoder, train_decoder_on_inputs, train_encoder_classifier, train_encoder_on_inputs,
};

#[cfg(test)]
mod tests;
