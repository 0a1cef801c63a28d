use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::encode::{EncodedBatch, Example};
use super::params::{Linear, Parameters};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::reward::{pattern_from_class, position_from_class, soft_reward, LabeledSequence, RewardWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PassKind {
    /// Plain cross-entropy.
    #[serde(rename = "ce")]
    CrossEntropy,
    /// Cross-entropy plus `alpha` times the soft reward.
    #[serde(rename = "reward")]
    Reward,
}

impl PassKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PassKind::CrossEntropy => "ce",
            PassKind::Reward => "reward",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    /// Pattern-head plus position-head masked mean cross-entropy.
    pub ce: f64,
    pub pattern_ce: f64,
    pub position_ce: f64,
    /// Soft reward; only present on reward passes.
    pub reward: Option<f64>,
    pub total: f64,
}

/// Class probabilities for the real tokens of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutput {
    pub pattern: Array2<f64>,
    pub position: Array2<f64>,
}

struct BlockCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Vec<Array2<f64>>,
    concat: Array2<f64>,
    mid: Array2<f64>,
    hidden: Array2<f64>,
}

struct SequenceCache {
    ids: Vec<usize>,
    blocks: Vec<BlockCache>,
    out: Array2<f64>,
    pattern_logits: Array2<f64>,
    position_logits: Array2<f64>,
    pattern: Array2<f64>,
    position: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Parameters,
}

fn affine(x: &Array2<f64>, l: &Linear) -> Array2<f64> {
    x.dot(&l.weight) + &l.bias
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

fn log_sum_exp(row: ArrayView1<'_, f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Pulls an upstream gradient on softmax outputs back onto the logits.
fn softmax_backward(probs: ArrayView2<'_, f64>, d_probs: ArrayView2<'_, f64>) -> Array2<f64> {
    let dot = (&d_probs * &probs).sum_axis(Axis(1)).insert_axis(Axis(1));
    &probs * &(&d_probs - &dot)
}

fn accumulate_linear(grad: &mut Linear, input: &Array2<f64>, d_out: &Array2<f64>) {
    grad.weight += &input.t().dot(d_out);
    grad.bias += &d_out.sum_axis(Axis(0));
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = Parameters::init(&config);
        Ok(Model { config, params })
    }

    pub fn with_params(config: ModelConfig, params: Parameters) -> Result<Self> {
        config.validate()?;
        let expected = Parameters::zeros(&config);
        let shapes = |p: &Parameters| {
            p.tensors()
                .iter()
                .map(|(n, t)| (n.clone(), t.len()))
                .collect::<Vec<_>>()
        };
        if shapes(&expected) != shapes(&params) {
            return Err(Error::Shape("parameters do not match model config".into()));
        }
        Ok(Model { config, params })
    }

    /// Zeroes both classification heads so every output row is uniform.
    pub fn zero_heads(&mut self) {
        for head in [&mut self.params.pattern_head, &mut self.params.position_head] {
            head.weight.fill(0.0);
            head.bias.fill(0.0);
        }
    }

    fn forward_sequence(&self, ids: &[usize]) -> SequenceCache {
        let p = &self.params;
        let d = self.config.embed_dim;
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let len = ids.len();
        let mut x = Array2::zeros((len, d));
        for (t, &id) in ids.iter().enumerate() {
            let mut row = x.row_mut(t);
            row += &p.token_embedding.row(id);
            row += &p.position_embedding.row(t);
        }
        let mut blocks = Vec::with_capacity(p.blocks.len());
        for block in &p.blocks {
            let q = affine(&x, &block.query);
            let k = affine(&x, &block.key);
            let v = affine(&x, &block.value);
            let mut concat = Array2::zeros((len, d));
            let mut attn = Vec::with_capacity(self.config.attention_heads);
            for h in 0..self.config.attention_heads {
                let cols = s![.., h * dh..(h + 1) * dh];
                let scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
                let a = softmax_rows(&scores);
                concat.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
                attn.push(a);
            }
            let mid = &x + &affine(&concat, &block.output);
            let hidden = affine(&mid, &block.ff_in).mapv(f64::tanh);
            let out = &mid + &affine(&hidden, &block.ff_out);
            blocks.push(BlockCache {
                input: std::mem::replace(&mut x, out),
                q,
                k,
                v,
                attn,
                concat,
                mid,
                hidden,
            });
        }
        let pattern_logits = affine(&x, &p.pattern_head);
        let position_logits = affine(&x, &p.position_head);
        SequenceCache {
            ids: ids.to_vec(),
            blocks,
            pattern: softmax_rows(&pattern_logits),
            position: softmax_rows(&position_logits),
            out: x,
            pattern_logits,
            position_logits,
        }
    }

    fn backward_sequence(
        &self,
        cache: &SequenceCache,
        d_pattern: &Array2<f64>,
        d_position: &Array2<f64>,
        grads: &mut Parameters,
    ) {
        let p = &self.params;
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        accumulate_linear(&mut grads.pattern_head, &cache.out, d_pattern);
        accumulate_linear(&mut grads.position_head, &cache.out, d_position);
        let mut dx = d_pattern.dot(&p.pattern_head.weight.t()) + d_position.dot(&p.position_head.weight.t());

        for (i, block) in p.blocks.iter().enumerate().rev() {
            let c = &cache.blocks[i];
            let g = &mut grads.blocks[i];
            // out = mid + tanh(mid W1 + b1) W2 + b2
            accumulate_linear(&mut g.ff_out, &c.hidden, &dx);
            let d_hidden = dx.dot(&block.ff_out.weight.t());
            let d_pre = d_hidden * &c.hidden.mapv(|h| 1.0 - h * h);
            accumulate_linear(&mut g.ff_in, &c.mid, &d_pre);
            let d_mid = dx + d_pre.dot(&block.ff_in.weight.t());
            // mid = input + concat Wo + bo
            accumulate_linear(&mut g.output, &c.concat, &d_mid);
            let d_concat = d_mid.dot(&block.output.weight.t());
            let mut dq = Array2::zeros(c.q.raw_dim());
            let mut dk = Array2::zeros(c.k.raw_dim());
            let mut dv = Array2::zeros(c.v.raw_dim());
            for (h, a) in c.attn.iter().enumerate() {
                let cols = s![.., h * dh..(h + 1) * dh];
                let d_head = d_concat.slice(cols);
                let da = d_head.dot(&c.v.slice(cols).t());
                dv.slice_mut(cols).assign(&a.t().dot(&d_head));
                let ds = softmax_backward(a.view(), da.view()) * scale;
                dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
                dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
            }
            accumulate_linear(&mut g.query, &c.input, &dq);
            accumulate_linear(&mut g.key, &c.input, &dk);
            accumulate_linear(&mut g.value, &c.input, &dv);
            dx = d_mid
                + dq.dot(&block.query.weight.t())
                + dk.dot(&block.key.weight.t())
                + dv.dot(&block.value.weight.t());
        }

        for (t, &id) in cache.ids.iter().enumerate() {
            let row = dx.row(t);
            let mut e = grads.token_embedding.row_mut(id);
            e += &row;
            let mut pe = grads.position_embedding.row_mut(t);
            pe += &row;
        }
    }

    fn sequences(&self, batch: &EncodedBatch) -> Result<Vec<SequenceCache>> {
        batch.check(&self.config)?;
        Ok(batch
            .lengths
            .iter()
            .enumerate()
            .map(|(b, &len)| {
                let ids: Vec<usize> = batch.ids.slice(s![b, ..len]).to_vec();
                self.forward_sequence(&ids)
            })
            .collect())
    }

    /// Class probabilities of both heads for every real token.
    pub fn forward(&self, batch: &EncodedBatch) -> Result<Vec<SequenceOutput>> {
        Ok(self
            .sequences(batch)?
            .into_iter()
            .map(|c| SequenceOutput {
                pattern: c.pattern,
                position: c.position,
            })
            .collect())
    }

    /// Loss and gradients for one pass. Cross-entropy is the masked mean over
    /// real tokens, summed over both heads; reward passes add
    /// `alpha * soft_reward`.
    pub fn loss_and_gradients(
        &self,
        batch: &EncodedBatch,
        kind: PassKind,
        alpha: f64,
        weights: &RewardWeights,
    ) -> Result<(Loss, Parameters)> {
        let (loss, caches, d_pattern, d_position) = self.loss_terms(batch, kind, alpha, weights)?;
        let mut grads = self.params.zeros_like();
        for ((cache, dp), dq) in caches.iter().zip(&d_pattern).zip(&d_position) {
            self.backward_sequence(cache, dp, dq, &mut grads);
        }
        if !grads.all_finite() {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        Ok((loss, grads))
    }

    /// Loss only, for finite-difference checks.
    pub fn loss(&self, batch: &EncodedBatch, kind: PassKind, alpha: f64, weights: &RewardWeights) -> Result<Loss> {
        Ok(self.loss_terms(batch, kind, alpha, weights)?.0)
    }

    #[allow(clippy::type_complexity)]
    fn loss_terms(
        &self,
        batch: &EncodedBatch,
        kind: PassKind,
        alpha: f64,
        weights: &RewardWeights,
    ) -> Result<(Loss, Vec<SequenceCache>, Vec<Array2<f64>>, Vec<Array2<f64>>)> {
        let caches = self.sequences(batch)?;
        let n = batch.valid_tokens();
        if n == 0 {
            return Err(Error::Invalid("batch has no tokens".into()));
        }
        let inv = 1.0 / n as f64;
        let mut pattern_ce = 0.0;
        let mut position_ce = 0.0;
        let mut d_pattern = Vec::with_capacity(caches.len());
        let mut d_position = Vec::with_capacity(caches.len());
        for (b, c) in caches.iter().enumerate() {
            let mut dp = c.pattern.clone() * inv;
            let mut dq = c.position.clone() * inv;
            for t in 0..c.ids.len() {
                let gp = batch.pattern_gold[[b, t]];
                let gq = batch.position_gold[[b, t]];
                pattern_ce += log_sum_exp(c.pattern_logits.row(t)) - c.pattern_logits[[t, gp]];
                position_ce += log_sum_exp(c.position_logits.row(t)) - c.position_logits[[t, gq]];
                dp[[t, gp]] -= inv;
                dq[[t, gq]] -= inv;
            }
            d_pattern.push(dp);
            d_position.push(dq);
        }
        pattern_ce *= inv;
        position_ce *= inv;
        let ce = pattern_ce + position_ce;

        let reward = match kind {
            PassKind::CrossEntropy => None,
            PassKind::Reward => {
                let stack = |f: fn(&SequenceCache) -> &Array2<f64>| {
                    let views: Vec<_> = caches.iter().map(|c| f(c).view()).collect();
                    ndarray::concatenate(Axis(0), &views).expect("head widths agree")
                };
                let probs_p = stack(|c| &c.pattern);
                let probs_q = stack(|c| &c.position);
                let r = soft_reward(probs_p.view(), probs_q.view(), &batch.gold(), weights)?;
                let mut offset = 0;
                for (b, c) in caches.iter().enumerate() {
                    let rows = s![offset..offset + c.ids.len(), ..];
                    d_pattern[b] += &(softmax_backward(c.pattern.view(), r.d_pattern.slice(rows)) * alpha);
                    d_position[b] += &(softmax_backward(c.position.view(), r.d_position.slice(rows)) * alpha);
                    offset += c.ids.len();
                }
                Some(r.value)
            }
        };
        let total = ce + reward.map_or(0.0, |r| alpha * r);
        if !total.is_finite() {
            return Err(Error::Divergence(format!("loss is {total}")));
        }
        Ok((
            Loss {
                ce,
                pattern_ce,
                position_ce,
                reward,
                total,
            },
            caches,
            d_pattern,
            d_position,
        ))
    }

    /// Argmax labels for one example (truncated to `max_seq_len`).
    pub fn predict(&self, example: &Example) -> LabeledSequence {
        let len = example.len().min(self.config.max_seq_len);
        let cache = self.forward_sequence(&example.input_ids[..len]);
        LabeledSequence {
            pattern: cache
                .pattern
                .rows()
                .into_iter()
                .map(|r| pattern_from_class(argmax(r)))
                .collect(),
            position: cache
                .position
                .rows()
                .into_iter()
                .map(|r| position_from_class(argmax(r)))
                .collect(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }
}
