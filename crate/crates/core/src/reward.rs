//! Alignment reward between predicted and gold (pattern, reading index)
//! labels, oriented as a penalty in `[0, 1]`: 0 is perfect agreement.
//!
//! The hard form scores argmax predictions by exact match. The soft form
//! replaces each exact-match indicator with the probability assigned to the
//! gold class, which makes it differentiable and equal to the hard form on
//! one-hot inputs. Gold positions labelled none carry no signal and are left
//! out of both denominators; a family with no scorable positions drops out and
//! the other family takes its weight.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-token labels of one or more snippets, concatenated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub pattern: Vec<Option<u32>>,
    pub position: Vec<Option<usize>>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }

    pub fn extend(&mut self, other: &LabeledSequence) {
        self.pattern.extend_from_slice(&other.pattern);
        self.position.extend_from_slice(&other.position);
    }

    fn check_shape(&self) -> Result<()> {
        if self.pattern.len() != self.position.len() {
            return Err(Error::Shape(format!(
                "pattern labels ({}) and reading indices ({}) differ in length",
                self.pattern.len(),
                self.position.len()
            )));
        }
        Ok(())
    }
}

/// Class id of a pattern label: 0 is none, `k` is pattern rank `k`.
pub fn pattern_class(label: Option<u32>) -> usize {
    label.map_or(0, |l| l as usize)
}

/// Class id of a reading index: 0 is none, `pi + 1` otherwise.
pub fn position_class(index: Option<usize>) -> usize {
    index.map_or(0, |p| p + 1)
}

pub fn pattern_from_class(class: usize) -> Option<u32> {
    (class > 0).then_some(class as u32)
}

pub fn position_from_class(class: usize) -> Option<usize> {
    class.checked_sub(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub pattern: f64,
    pub position: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            pattern: 0.5,
            position: 0.5,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if self.pattern < 0.0 || self.position < 0.0 || (self.pattern + self.position - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "reward weights must be non-negative and sum to 1, got {} + {}",
                self.pattern, self.position
            )));
        }
        Ok(())
    }

    /// Weights after dropping families without scorable gold positions.
    fn effective(&self, has_pattern: bool, has_position: bool) -> (f64, f64) {
        match (has_pattern, has_position) {
            (true, true) => (self.pattern, self.position),
            (true, false) => (1.0, 0.0),
            (false, true) => (0.0, 1.0),
            (false, false) => (self.pattern, self.position),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardScore {
    pub value: f64,
    pub pattern_acc: f64,
    pub position_acc: f64,
}

fn accuracy<T: PartialEq + Copy>(pred: &[Option<T>], gold: &[Option<T>]) -> Option<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (p, g) in pred.iter().zip(gold) {
        if g.is_some() {
            total += 1;
            hits += usize::from(p == g);
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

pub fn hard_reward(pred: &LabeledSequence, gold: &LabeledSequence, weights: &RewardWeights) -> Result<RewardScore> {
    weights.validate()?;
    pred.check_shape()?;
    gold.check_shape()?;
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!(
            "prediction has {} tokens, gold has {}",
            pred.len(),
            gold.len()
        )));
    }
    let pattern_acc = accuracy(&pred.pattern, &gold.pattern);
    let position_acc = accuracy(&pred.position, &gold.position);
    let (wp, wq) = weights.effective(pattern_acc.is_some(), position_acc.is_some());
    let pattern_acc = pattern_acc.unwrap_or(1.0);
    let position_acc = position_acc.unwrap_or(1.0);
    Ok(RewardScore {
        value: 1.0 - (wp * pattern_acc + wq * position_acc),
        pattern_acc,
        position_acc,
    })
}

/// Soft reward together with its gradient with respect to both probability
/// matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftReward {
    pub value: f64,
    pub pattern_mean: f64,
    pub position_mean: f64,
    pub d_pattern: Array2<f64>,
    pub d_position: Array2<f64>,
}

fn check_probabilities(probs: &ArrayView2<'_, f64>, what: &str) -> Result<()> {
    for (i, row) in probs.rows().into_iter().enumerate() {
        let mut sum = 0.0;
        for &p in row {
            if !p.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&p) {
                return Err(Error::Invalid(format!("{what} row {i} holds invalid probability {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Invalid(format!("{what} row {i} sums to {sum}")));
        }
    }
    Ok(())
}

fn gold_mean(probs: &ArrayView2<'_, f64>, gold: &[usize], what: &str) -> Result<(Option<f64>, Vec<usize>)> {
    let mut rows = Vec::new();
    let mut total = 0.0;
    for (i, &g) in gold.iter().enumerate() {
        if g == 0 {
            continue;
        }
        if g >= probs.ncols() {
            return Err(Error::Shape(format!(
                "{what} gold class {g} out of range {}",
                probs.ncols()
            )));
        }
        total += probs[[i, g]];
        rows.push(i);
    }
    Ok(((!rows.is_empty()).then(|| total / rows.len() as f64), rows))
}

/// `1 - (w_pattern * mean gold-class probability + w_position * ...)`, with
/// means taken over gold positions that are not none.
pub fn soft_reward(
    pattern_probs: ArrayView2<'_, f64>,
    position_probs: ArrayView2<'_, f64>,
    gold: &LabeledSequence,
    weights: &RewardWeights,
) -> Result<SoftReward> {
    weights.validate()?;
    gold.check_shape()?;
    let n = gold.len();
    if pattern_probs.nrows() != n || position_probs.nrows() != n {
        return Err(Error::Shape(format!(
            "probability rows ({}, {}) do not match {n} gold tokens",
            pattern_probs.nrows(),
            position_probs.nrows()
        )));
    }
    check_probabilities(&pattern_probs, "pattern")?;
    check_probabilities(&position_probs, "position")?;
    let pattern_gold: Vec<usize> = gold.pattern.iter().map(|&l| pattern_class(l)).collect();
    let position_gold: Vec<usize> = gold.position.iter().map(|&p| position_class(p)).collect();
    let (pm, p_rows) = gold_mean(&pattern_probs, &pattern_gold, "pattern")?;
    let (qm, q_rows) = gold_mean(&position_probs, &position_gold, "position")?;
    let (wp, wq) = weights.effective(pm.is_some(), qm.is_some());
    let pattern_mean = pm.unwrap_or(1.0);
    let position_mean = qm.unwrap_or(1.0);

    let mut d_pattern = Array2::zeros(pattern_probs.raw_dim());
    for &i in &p_rows {
        d_pattern[[i, pattern_gold[i]]] = -wp / p_rows.len() as f64;
    }
    let mut d_position = Array2::zeros(position_probs.raw_dim());
    for &i in &q_rows {
        d_position[[i, position_gold[i]]] = -wq / q_rows.len() as f64;
    }
    Ok(SoftReward {
        value: 1.0 - (wp * pattern_mean + wq * position_mean),
        pattern_mean,
        position_mean,
        d_pattern,
        d_position,
    })
}
