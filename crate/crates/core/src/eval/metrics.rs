use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{pattern_class, position_class, LabeledSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabelFamily {
    #[serde(rename = "semantic-pattern")]
    Pattern,
    #[serde(rename = "positional")]
    Positional,
}

impl LabelFamily {
    pub const BOTH: [LabelFamily; 2] = [LabelFamily::Pattern, LabelFamily::Positional];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelFamily::Pattern => "semantic-pattern",
            LabelFamily::Positional => "positional",
        }
    }

    /// Class ids (0 = none) of one family.
    pub fn classes(self, seq: &LabeledSequence) -> Vec<usize> {
        match self {
            LabelFamily::Pattern => seq.pattern.iter().map(|&l| pattern_class(l)).collect(),
            LabelFamily::Positional => seq.position.iter().map(|&p| position_class(p)).collect(),
        }
    }
}

impl fmt::Display for LabelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semantic-pattern" => Ok(LabelFamily::Pattern),
            "positional" => Ok(LabelFamily::Positional),
            _ => Err(Error::Invalid(format!("unknown label family `{s}`"))),
        }
    }
}

/// Macro-averaged precision, recall and F1 over the non-none classes that
/// occur in the gold labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub family: LabelFamily,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold tokens with a non-none label.
    pub support: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ClassCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class confusion counts for the non-none classes present in `gold`.
pub fn class_counts(pred: &[usize], gold: &[usize]) -> Result<BTreeMap<usize, ClassCounts>> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    let classes: BTreeSet<usize> = gold.iter().copied().filter(|&c| c != 0).collect();
    let mut counts: BTreeMap<usize, ClassCounts> = classes.iter().map(|&c| (c, ClassCounts::default())).collect();
    for (&p, &g) in pred.iter().zip(gold) {
        if p == g {
            if let Some(c) = counts.get_mut(&g) {
                c.tp += 1;
            }
            continue;
        }
        if let Some(c) = counts.get_mut(&p) {
            c.fp += 1;
        }
        if let Some(c) = counts.get_mut(&g) {
            c.fn_ += 1;
        }
    }
    Ok(counts)
}

/// Macro scores over class ids; per-class F1 values are averaged, so the
/// macro F1 always lies between the worst and best class.
pub fn score_classes(pred: &[usize], gold: &[usize], family: LabelFamily) -> Result<MetricRow> {
    let counts = class_counts(pred, gold)?;
    if counts.is_empty() {
        return Err(Error::Invalid(format!("no scorable {family} labels")));
    }
    let k = counts.len() as f64;
    Ok(MetricRow {
        family,
        precision: counts.values().map(ClassCounts::precision).sum::<f64>() / k,
        recall: counts.values().map(ClassCounts::recall).sum::<f64>() / k,
        f1: counts.values().map(ClassCounts::f1).sum::<f64>() / k,
        support: gold.iter().filter(|&&g| g != 0).count(),
    })
}

pub fn score_labels(pred: &LabeledSequence, gold: &LabeledSequence, family: LabelFamily) -> Result<MetricRow> {
    score_classes(&family.classes(pred), &family.classes(gold), family)
}

/// Scores a predictor that always outputs the most frequent non-none class
/// of `train` (lowest id on ties).
pub fn majority_class_baseline(
    train: &LabeledSequence,
    test: &LabeledSequence,
    family: LabelFamily,
) -> Result<MetricRow> {
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for c in family.classes(train) {
        if c != 0 {
            *freq.entry(c).or_insert(0) += 1;
        }
    }
    let majority = freq
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&c, _)| c)
        .ok_or_else(|| Error::Invalid(format!("no {family} labels to take a majority over")))?;
    let gold = family.classes(test);
    score_classes(&vec![majority; gold.len()], &gold, family)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let gold = [1, 0, 2, 2, 3];
        let row = score_classes(&gold, &gold, LabelFamily::Pattern).unwrap();
        assert_eq!((row.precision, row.recall, row.f1, row.support), (1.0, 1.0, 1.0, 4));
    }

    #[test]
    fn all_none_has_zero_recall() {
        let row = score_classes(&[0, 0, 0], &[1, 2, 0], LabelFamily::Positional).unwrap();
        assert_eq!((row.precision, row.recall, row.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_class_hand_count() {
        // class 1: tp 1, fp 1, fn 1; class 2: tp 1, fp 1, fn 1
        let gold = [1, 1, 2, 2];
        let pred = [1, 2, 2, 1];
        let row = score_classes(&pred, &gold, LabelFamily::Pattern).unwrap();
        assert_eq!((row.precision, row.recall, row.f1), (0.5, 0.5, 0.5));
        let counts = class_counts(&pred, &gold).unwrap();
        assert_eq!(counts[&1], ClassCounts { tp: 1, fp: 1, fn_: 1 });
    }

    #[test]
    fn absent_classes_do_not_count() {
        // predicting class 5 (absent from gold) is a false positive for nobody
        let row = score_classes(&[5, 1], &[1, 1], LabelFamily::Pattern).unwrap();
        assert_eq!(row.precision, 1.0);
        assert_eq!(row.recall, 0.5);
    }

    #[test]
    fn errors() {
        assert!(score_classes(&[0], &[0], LabelFamily::Pattern).is_err());
        assert!(score_classes(&[0, 1], &[1], LabelFamily::Pattern).is_err());
    }

    #[test]
    fn majority_baseline() {
        let train = LabeledSequence {
            pattern: vec![Some(2), Some(2), Some(1), None],
            position: vec![None; 4],
        };
        let test = LabeledSequence {
            pattern: vec![Some(2), Some(1), None, Some(2)],
            position: vec![None; 4],
        };
        let row = majority_class_baseline(&train, &test, LabelFamily::Pattern).unwrap();
        // class 2: tp 2, fp 2 -> p 0.5, r 1; class 1: all zero
        assert!((row.f1 - (2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!(majority_class_baseline(&train, &test, LabelFamily::Positional).is_err());
    }
}
