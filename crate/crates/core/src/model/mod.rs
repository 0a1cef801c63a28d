//! A small two-head transformer sequence labeler with hand-written
//! backpropagation and an AdamW optimizer.

mod encode;
mod gradcheck;
mod io;
mod network;
mod optim;
mod params;

use serde::{Deserialize, Serialize};

use crate::code::SemanticLabel;
use crate::error::{Error, Result};

pub use encode::{encode_batch, EncodedBatch, Example};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION};
pub use network::{argmax, Loss, Model, PassKind, SequenceOutput};
pub use optim::AdamW;
pub use params::{Block, Linear, Parameters};

/// Pattern head classes: none plus 20 ranked patterns.
pub const PATTERN_CLASSES: usize = 21;
/// Position head classes: none plus reading indices 0..=99.
pub const POSITION_CLASSES: usize = 101;
/// Input vocabulary: padding plus one id per semantic label.
pub const INPUT_VOCAB: usize = SemanticLabel::ALL.len() + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub attention_heads: usize,
    pub attention_layers: usize,
    pub ff_dim: usize,
    pub max_seq_len: usize,
    pub vocab_size: usize,
    pub pattern_classes: usize,
    pub position_classes: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 64,
            attention_heads: 4,
            attention_layers: 1,
            ff_dim: 128,
            max_seq_len: 256,
            vocab_size: INPUT_VOCAB,
            pattern_classes: PATTERN_CLASSES,
            position_classes: POSITION_CLASSES,
            init_scale: 1.0,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.attention_heads == 0 || !self.embed_dim.is_multiple_of(self.attention_heads) {
            return Err(Error::Config(format!(
                "embed_dim {} must be a positive multiple of attention_heads {}",
                self.embed_dim, self.attention_heads
            )));
        }
        if self.max_seq_len == 0 || self.ff_dim == 0 || self.vocab_size < 2 {
            return Err(Error::Config(
                "max_seq_len, ff_dim and vocab_size must be positive".into(),
            ));
        }
        if self.pattern_classes < 2 || self.position_classes < 2 {
            return Err(Error::Config("each head needs at least two classes".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Config(format!("invalid init_scale {}", self.init_scale)));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.attention_heads
    }
}
