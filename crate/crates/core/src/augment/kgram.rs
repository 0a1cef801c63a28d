use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::code::SemanticLabel;
use crate::error::{Error, Result};

/// Default number of ranked patterns kept.
pub const DEFAULT_TOP_PATTERNS: usize = 20;

pub type KGramCounts = BTreeMap<Vec<SemanticLabel>, u64>;

/// Counts every contiguous window of each length in `k_values`.
pub fn mine_kgrams(sequences: &[Vec<SemanticLabel>], k_values: &[usize]) -> KGramCounts {
    let mut counts = KGramCounts::new();
    for seq in sequences {
        for &k in k_values {
            if k == 0 {
                continue;
            }
            for window in seq.windows(k) {
                *counts.entry(window.to_vec()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Sums `other` into `counts`.
pub fn merge_counts(counts: &mut KGramCounts, other: &KGramCounts) {
    for (k, v) in other {
        *counts.entry(k.clone()).or_insert(0) += v;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KGramPattern {
    pub labels: Vec<SemanticLabel>,
    pub frequency: u64,
    /// 1-based rank; 1 is the most frequent pattern.
    pub numeric_label: u32,
}

/// Ranked patterns, index `i` holding numeric label `i + 1`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternTable {
    patterns: Vec<KGramPattern>,
    index: BTreeMap<Vec<SemanticLabel>, u32>,
}

impl PatternTable {
    fn from_ranked(patterns: Vec<KGramPattern>) -> Self {
        let index = patterns.iter().map(|p| (p.labels.clone(), p.numeric_label)).collect();
        PatternTable { patterns, index }
    }

    pub fn patterns(&self) -> &[KGramPattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn label_of(&self, labels: &[SemanticLabel]) -> Option<u32> {
        self.index.get(labels).copied()
    }

    pub fn contains_label(&self, label: u32) -> bool {
        label >= 1 && (label as usize) <= self.patterns.len()
    }

    pub fn write_json(&self, out: impl Write) -> Result<()> {
        let rows: Vec<PatternRow> = self
            .patterns
            .iter()
            .map(|p| PatternRow {
                rank: p.numeric_label,
                labels: p.labels.clone(),
                frequency: p.frequency,
            })
            .collect();
        serde_json::to_writer_pretty(out, &rows)?;
        Ok(())
    }

    pub fn read_json(input: impl Read) -> Result<Self> {
        let mut rows: Vec<PatternRow> = serde_json::from_reader(input)?;
        rows.sort_by_key(|r| r.rank);
        for (i, r) in rows.iter().enumerate() {
            if r.rank as usize != i + 1 {
                return Err(Error::Invalid(format!(
                    "pattern ranks must be 1..={}, found {}",
                    rows.len(),
                    r.rank
                )));
            }
        }
        Ok(Self::from_ranked(
            rows.into_iter()
                .map(|r| KGramPattern {
                    labels: r.labels,
                    frequency: r.frequency,
                    numeric_label: r.rank,
                })
                .collect(),
        ))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternRow {
    rank: u32,
    labels: Vec<SemanticLabel>,
    frequency: u64,
}

/// Ranks by frequency (descending), then longer patterns first, then label
/// order, and keeps the first `limit`.
pub fn select_top_patterns(counts: &KGramCounts, limit: usize) -> Result<PatternTable> {
    if counts.is_empty() {
        return Err(Error::Invalid("no k-gram counts to rank".into()));
    }
    let mut ranked: Vec<(&Vec<SemanticLabel>, u64)> = counts.iter().map(|(k, &v)| (k, v)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(b.0.len().cmp(&a.0.len())).then(a.0.cmp(b.0)));
    Ok(PatternTable::from_ranked(
        ranked
            .into_iter()
            .take(limit)
            .enumerate()
            .map(|(i, (labels, frequency))| KGramPattern {
                labels: labels.clone(),
                frequency,
                numeric_label: i as u32 + 1,
            })
            .collect(),
    ))
}

/// Pattern label per token of an ordered token walk.
///
/// At each position a trigram from the table is preferred over a bigram. A
/// token covered by several matches keeps the best-ranked one, then the
/// leftmost.
pub fn assign_pattern_labels(walk: &[usize], labels: &[SemanticLabel], table: &PatternTable) -> BTreeMap<usize, u32> {
    let seq: Vec<SemanticLabel> = walk.iter().map(|&i| labels[i]).collect();
    let mut best: BTreeMap<usize, (u32, usize)> = BTreeMap::new();
    for pos in 0..seq.len() {
        let matched = [3usize, 2].into_iter().find_map(|k| {
            seq.get(pos..pos + k)
                .and_then(|w| table.label_of(w))
                .map(|label| (label, k))
        });
        let Some((label, k)) = matched else { continue };
        for &token in &walk[pos..pos + k] {
            best.entry(token)
                .and_modify(|cur| *cur = (*cur).min((label, pos)))
                .or_insert((label, pos));
        }
    }
    best.into_iter().map(|(t, (label, _))| (t, label)).collect()
}
