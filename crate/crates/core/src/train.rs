//! Mini-batch training with an interleaved reward pass.

use std::io::Write;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentedDataset;
use crate::code::Corpus;
use crate::error::{Error, Result};
use crate::eval::{score_labels, LabelFamily, MetricRow};
use crate::model::{encode_batch, AdamW, Example, Model, PassKind};
use crate::reward::{LabeledSequence, RewardWeights};

pub const DEFAULT_CHECKPOINTS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// Salt for the reward-batch sampler so it does not share a stream with the
/// epoch shuffle.
const REWARD_STREAM: u64 = 0x005E_ED0F_BEEF;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub alpha: f64,
    /// A reward pass runs after every `reward_every` cross-entropy batches.
    pub reward_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub split_ratio: f64,
    /// Fractions of the cross-entropy batches after which the held-out split
    /// is scored.
    pub checkpoints: Vec<f64>,
    pub reward_weights: RewardWeights,
    /// When false the interleaved passes are plain cross-entropy passes on the
    /// sampled batch.
    pub reward_term: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            weight_decay: 0.01,
            seed: 42,
            alpha: 1.0,
            reward_every: 20,
            epochs: 1,
            batch_size: 8,
            split_ratio: 0.8,
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
            reward_weights: RewardWeights::default(),
            reward_term: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight decay must be non-negative");
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad("alpha must be non-negative");
        }
        if self.reward_every == 0 {
            return bad("reward cadence must be at least 1");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be at least 1");
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split ratio must be in (0, 1)");
        }
        if self.checkpoints.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return bad("checkpoint ratios must be in (0, 1]");
        }
        self.reward_weights.validate()
    }
}

/// Seeded shuffle, then the first `ceil(ratio * n)` items train and the rest
/// are held out. Both sides keep at least one item.
pub fn split_dataset<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let n = items.len();
    if n < 2 {
        return Err(Error::Invalid(format!("cannot split {n} snippet(s); need at least 2")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // the epsilon keeps 0.7 * 10 from rounding up to 8
    let n_train = ((ratio * n as f64 - 1e-9).ceil() as usize).clamp(1, n - 1);
    let train = order[..n_train].iter().map(|&i| items[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}

/// One training example per augmented snippet, in id order.
pub fn build_examples(corpus: &Corpus, dataset: &AugmentedDataset) -> Result<Vec<Example>> {
    dataset
        .snippets
        .iter()
        .map(|aug| Ok(Example::new(corpus.require(&aug.id)?, Some(aug))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub pass_index: usize,
    /// Cross-entropy batches completed when this pass ran.
    pub batch_index: usize,
    pub kind: PassKind,
    /// Set on passes over a sampled batch rather than the epoch order.
    pub interleaved: bool,
    pub ce: f64,
    pub reward: Option<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEval {
    pub ratio: f64,
    pub batches_seen: usize,
    pub pattern: MetricRow,
    pub positional: MetricRow,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub passes: Vec<LossBreakdown>,
    pub checkpoints: Vec<CheckpointEval>,
}

impl TrainingHistory {
    pub fn reward_passes(&self) -> impl Iterator<Item = &LossBreakdown> {
        self.passes.iter().filter(|p| p.kind == PassKind::Reward)
    }

    pub fn ce_batches(&self) -> usize {
        self.passes.iter().filter(|p| !p.interleaved).count()
    }

    /// One row per pass: `pass_index,kind,L_CE,R,L_total`. `R` is empty on
    /// cross-entropy passes.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pass_index", "kind", "L_CE", "R", "L_total"])?;
        for p in &self.passes {
            w.write_record([
                p.pass_index.to_string(),
                p.kind.as_str().to_string(),
                p.ce.to_string(),
                p.reward.map(|r| r.to_string()).unwrap_or_default(),
                p.total.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<history>", e))?;
        Ok(())
    }
}

/// Predicts every example and scores both families over the concatenation.
pub fn evaluate(model: &Model, examples: &[Example]) -> Result<(MetricRow, MetricRow)> {
    let (pred, gold) = predict_all(model, examples);
    Ok((
        score_labels(&pred, &gold, LabelFamily::Pattern)?,
        score_labels(&pred, &gold, LabelFamily::Positional)?,
    ))
}

/// Concatenated predictions and gold (gold truncated like the input).
pub fn predict_all(model: &Model, examples: &[Example]) -> (LabeledSequence, LabeledSequence) {
    let mut pred = LabeledSequence::default();
    let mut gold = LabeledSequence::default();
    for ex in examples {
        let p = model.predict(ex);
        let n = p.len();
        pred.extend(&p);
        gold.extend(&LabeledSequence {
            pattern: ex.gold.pattern[..n].to_vec(),
            position: ex.gold.position[..n].to_vec(),
        });
    }
    (pred, gold)
}

/// Token-level accuracy of each head over every token, none included.
pub fn token_accuracy(model: &Model, examples: &[Example]) -> (f64, f64) {
    let (pred, gold) = predict_all(model, examples);
    let n = gold.len().max(1) as f64;
    let hits = |a: usize| a as f64 / n;
    (
        hits(pred.pattern.iter().zip(&gold.pattern).filter(|(p, g)| p == g).count()),
        hits(pred.position.iter().zip(&gold.position).filter(|(p, g)| p == g).count()),
    )
}

/// Trains `model` in place. `held_out`, when given, is scored at each
/// checkpoint ratio.
pub fn train(
    model: &mut Model,
    examples: &[Example],
    held_out: Option<&[Example]>,
    config: &TrainConfig,
) -> Result<TrainingHistory> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Invalid("no training examples".into()));
    }
    let per_epoch = examples.len().div_ceil(config.batch_size);
    let total = per_epoch * config.epochs;
    let mut targets: Vec<(usize, f64)> = config
        .checkpoints
        .iter()
        .map(|&r| (((r * total as f64 - 1e-9).ceil() as usize).max(1), r))
        .collect();
    targets.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut next_target = 0;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut reward_rng = ChaCha8Rng::seed_from_u64(config.seed ^ REWARD_STREAM);
    let mut opt = AdamW::new(config.learning_rate).with_weight_decay(config.weight_decay);
    let mut history = TrainingHistory::default();
    let mut done = 0usize;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            step(
                model,
                &mut opt,
                &batch,
                PassKind::CrossEntropy,
                false,
                done,
                config,
                &mut history,
            )?;
            done += 1;

            if done.is_multiple_of(config.reward_every) {
                let k = config.batch_size.min(examples.len());
                let picked: Vec<&Example> = sample(&mut reward_rng, examples.len(), k)
                    .iter()
                    .map(|i| &examples[i])
                    .collect();
                let kind = if config.reward_term {
                    PassKind::Reward
                } else {
                    PassKind::CrossEntropy
                };
                step(model, &mut opt, &picked, kind, true, done, config, &mut history)?;
            }

            while next_target < targets.len() && targets[next_target].0 == done {
                if let Some(held) = held_out {
                    let (pattern, positional) = evaluate(model, held)?;
                    history.checkpoints.push(CheckpointEval {
                        ratio: targets[next_target].1,
                        batches_seen: done,
                        pattern,
                        positional,
                    });
                }
                next_target += 1;
            }
        }
        log::debug!("epoch {} done after {} batches", epoch + 1, done);
    }
    Ok(history)
}

#[allow(clippy::too_many_arguments)]
fn step(
    model: &mut Model,
    opt: &mut AdamW,
    batch: &[&Example],
    kind: PassKind,
    interleaved: bool,
    done: usize,
    config: &TrainConfig,
    history: &mut TrainingHistory,
) -> Result<()> {
    let encoded = encode_batch(batch, &model.config)?;
    let (loss, grads) = model.loss_and_gradients(&encoded, kind, config.alpha, &config.reward_weights)?;
    opt.step(&mut model.params, &grads);
    if !model.params.all_finite() {
        return Err(Error::Divergence(format!(
            "parameters diverged at pass {}",
            history.passes.len()
        )));
    }
    history.passes.push(LossBreakdown {
        pass_index: history.passes.len(),
        batch_index: done,
        kind,
        interleaved,
        ce: loss.ce,
        reward: loss.reward,
        total: loss.total,
    });
    Ok(())
}
