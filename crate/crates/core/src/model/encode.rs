use ndarray::Array2;

use super::ModelConfig;
use crate::augment::AugmentedSnippet;
use crate::code::Snippet;
use crate::error::{Error, Result};
use crate::reward::{pattern_class, position_class, LabeledSequence};

/// One snippet as model input plus its gold labels, none-padded outside the
/// augmented set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub input_ids: Vec<usize>,
    pub gold: LabeledSequence,
}

impl Example {
    pub fn new(snippet: &Snippet, augmented: Option<&AugmentedSnippet>) -> Self {
        let n = snippet.len();
        let mut gold = LabeledSequence {
            pattern: vec![None; n],
            position: vec![None; n],
        };
        if let Some(aug) = augmented {
            for t in &aug.tokens {
                if t.token_index < n {
                    gold.pattern[t.token_index] = t.pattern_label;
                    gold.position[t.token_index] = t.reading_index;
                }
            }
        }
        Example {
            id: snippet.id.clone(),
            input_ids: snippet.tokens.iter().map(|t| t.label.id()).collect(),
            gold,
        }
    }

    pub fn len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_ids.is_empty()
    }
}

/// Right-padded batch; `mask[b][t]` is true for real tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub ids: Array2<usize>,
    pub pattern_gold: Array2<usize>,
    pub position_gold: Array2<usize>,
    pub mask: Array2<bool>,
    pub lengths: Vec<usize>,
}

impl EncodedBatch {
    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn valid_tokens(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// Gold labels of all real tokens, batch-major.
    pub fn gold(&self) -> LabeledSequence {
        let mut out = LabeledSequence::default();
        for (b, &len) in self.lengths.iter().enumerate() {
            for t in 0..len {
                out.pattern
                    .push(crate::reward::pattern_from_class(self.pattern_gold[[b, t]]));
                out.position
                    .push(crate::reward::position_from_class(self.position_gold[[b, t]]));
            }
        }
        out
    }

    pub(crate) fn check(&self, config: &ModelConfig) -> Result<()> {
        let shape = self.ids.dim();
        if self.pattern_gold.dim() != shape || self.position_gold.dim() != shape || self.mask.dim() != shape {
            return Err(Error::Shape("batch matrices disagree in shape".into()));
        }
        if self.lengths.len() != shape.0 {
            return Err(Error::Shape("lengths do not match batch size".into()));
        }
        if shape.1 > config.max_seq_len {
            return Err(Error::Shape(format!(
                "sequence length {} exceeds max_seq_len {}",
                shape.1, config.max_seq_len
            )));
        }
        for (b, &len) in self.lengths.iter().enumerate() {
            for t in 0..shape.1 {
                if self.mask[[b, t]] != (t < len) {
                    return Err(Error::Shape(format!("mask of row {b} is not a prefix of length {len}")));
                }
                if t < len && (self.ids[[b, t]] == 0 || self.ids[[b, t]] >= config.vocab_size) {
                    return Err(Error::Shape(format!("input id {} out of vocabulary", self.ids[[b, t]])));
                }
            }
        }
        Ok(())
    }
}

/// Pads a batch to its longest member, truncating anything longer than
/// `max_seq_len`.
pub fn encode_batch(examples: &[&Example], config: &ModelConfig) -> Result<EncodedBatch> {
    if examples.is_empty() {
        return Err(Error::Invalid("cannot encode an empty batch".into()));
    }
    let lengths: Vec<usize> = examples
        .iter()
        .map(|e| {
            if e.len() > config.max_seq_len {
                log::warn!(
                    "snippet `{}` has {} tokens, truncated to {}",
                    e.id,
                    e.len(),
                    config.max_seq_len
                );
            }
            e.len().min(config.max_seq_len)
        })
        .collect();
    let width = lengths.iter().copied().max().unwrap_or(0);
    let shape = (examples.len(), width);
    let mut batch = EncodedBatch {
        ids: Array2::zeros(shape),
        pattern_gold: Array2::zeros(shape),
        position_gold: Array2::zeros(shape),
        mask: Array2::from_elem(shape, false),
        lengths,
    };
    for (b, e) in examples.iter().enumerate() {
        for t in 0..batch.lengths[b] {
            let pc = pattern_class(e.gold.pattern[t]);
            let qc = position_class(e.gold.position[t]);
            if pc >= config.pattern_classes || qc >= config.position_classes {
                return Err(Error::Shape(format!(
                    "snippet `{}` token {t}: gold classes ({pc}, {qc}) exceed head sizes ({}, {})",
                    e.id, config.pattern_classes, config.position_classes
                )));
            }
            batch.ids[[b, t]] = e.input_ids[t];
            batch.pattern_gold[[b, t]] = pc;
            batch.position_gold[[b, t]] = qc;
            batch.mask[[b, t]] = true;
        }
    }
    Ok(batch)
}
