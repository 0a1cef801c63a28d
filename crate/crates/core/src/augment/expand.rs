use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::code::{SemanticLabel, Snippet};
use crate::error::{Error, Result};
use crate::gaze::Scanpath;

/// Widest window accepted without an explicit override.
pub const MAX_WINDOW_LINES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdjacencyConfig {
    pub window_lines: usize,
    /// Permits `window_lines > 3`.
    pub allow_wide: bool,
}

impl Default for AdjacencyConfig {
    fn default() -> Self {
        AdjacencyConfig {
            window_lines: MAX_WINDOW_LINES,
            allow_wide: false,
        }
    }
}

impl AdjacencyConfig {
    pub fn new(window_lines: usize) -> Self {
        AdjacencyConfig {
            window_lines,
            allow_wide: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_lines > MAX_WINDOW_LINES && !self.allow_wide {
            return Err(Error::Config(format!(
                "window_lines must be in 0..={MAX_WINDOW_LINES} (got {}); pass the wide-window override to exceed it",
                self.window_lines
            )));
        }
        Ok(())
    }
}

/// How a token entered the augmented set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Fixated,
    Expanded { anchor: usize },
}

impl Origin {
    pub fn anchor(self) -> Option<usize> {
        match self {
            Origin::Fixated => None,
            Origin::Expanded { anchor } => Some(anchor),
        }
    }
}

/// Adds every token within `window_lines` lines of a fixated token that shares
/// its label. Each added token records the closest such fixated anchor by line
/// distance, then by lower token index.
pub fn expand_adjacency(
    fixated: &BTreeSet<usize>,
    snippet: &Snippet,
    config: &AdjacencyConfig,
) -> Result<BTreeMap<usize, Origin>> {
    config.validate()?;
    for &i in fixated {
        snippet.check_index(i)?;
    }
    let tokens = &snippet.tokens;
    let w = config.window_lines;
    let mut best: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &anchor in fixated {
        let line = tokens[anchor].line;
        let label = tokens[anchor].label;
        let lo = tokens.partition_point(|t| t.line + w < line);
        let hi = tokens.partition_point(|t| t.line <= line + w);
        for t in &tokens[lo..hi] {
            if t.label != label || fixated.contains(&t.index) {
                continue;
            }
            let key = (t.line.abs_diff(line), anchor);
            best.entry(t.index).and_modify(|k| *k = (*k).min(key)).or_insert(key);
        }
    }
    let mut out: BTreeMap<usize, Origin> = fixated.iter().map(|&i| (i, Origin::Fixated)).collect();
    out.extend(
        best.into_iter()
            .map(|(i, (_, anchor))| (i, Origin::Expanded { anchor })),
    );
    Ok(out)
}

/// Labels of fixated tokens in fixation order, with consecutive refixations
/// of the same token collapsed.
pub fn fixation_label_sequence(scanpath: &Scanpath, snippet: &Snippet) -> Result<Vec<SemanticLabel>> {
    scanpath.validate(snippet)?;
    Ok(collapse_refixations(scanpath)
        .into_iter()
        .map(|i| snippet.tokens[i].label)
        .collect())
}

pub(crate) fn collapse_refixations(scanpath: &Scanpath) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(scanpath.events.len());
    for i in scanpath.token_indices() {
        if out.last() != Some(&i) {
            out.push(i);
        }
    }
    out
}

/// Which token order k-grams are mined over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MiningOrder {
    /// Fixation order, each expanded token placed right after the first
    /// visit to its anchor.
    #[default]
    Scanpath,
    /// Source order over the augmented set.
    Source,
}

/// The augmented set as an ordered token walk (tokens may repeat on revisits).
pub fn augmented_order(scanpath: &Scanpath, expansion: &BTreeMap<usize, Origin>, order: MiningOrder) -> Vec<usize> {
    match order {
        MiningOrder::Source => expansion.keys().copied().collect(),
        MiningOrder::Scanpath => {
            let mut by_anchor: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (&i, origin) in expansion {
                if let Some(a) = origin.anchor() {
                    by_anchor.entry(a).or_default().push(i);
                }
            }
            let mut visited = BTreeSet::new();
            let mut out = Vec::new();
            for i in collapse_refixations(scanpath) {
                out.push(i);
                if visited.insert(i) {
                    if let Some(expanded) = by_anchor.get(&i) {
                        out.extend(expanded);
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::parse_snippet;
    use crate::gaze::FixationEvent;

    fn path(tokens: &[usize]) -> Scanpath {
        Scanpath {
            snippet_id: "s".into(),
            events: tokens
                .iter()
                .map(|&token_index| FixationEvent {
                    token_index,
                    duration_ms: 1.0,
                })
                .collect(),
            unmapped_count: 0,
        }
    }

    #[test]
    fn window_zero_distinct_labels_adds_nothing() {
        let s = parse_snippet("s", "if\nx\n42\n;").unwrap();
        let f = BTreeSet::from([0, 2]);
        let out = expand_adjacency(&f, &s, &AdjacencyConfig::new(0)).unwrap();
        assert_eq!(out.keys().copied().collect::<BTreeSet<_>>(), f);
    }

    #[test]
    fn identifier_two_lines_away_joins() {
        // `a` on line 5, `b` on line 7
        let s = parse_snippet("s", "\n\n\n\na\n;\nb\n").unwrap();
        let out = expand_adjacency(&BTreeSet::from([0]), &s, &AdjacencyConfig::new(3)).unwrap();
        assert_eq!(out.get(&0), Some(&Origin::Fixated));
        assert_eq!(out.get(&2), Some(&Origin::Expanded { anchor: 0 }));
        assert!(!out.contains_key(&1));
    }

    #[test]
    fn nearest_anchor_wins() {
        // identifiers on lines 1, 2, 4
        let s = parse_snippet("s", "a\nb\n\nc").unwrap();
        let out = expand_adjacency(&BTreeSet::from([0, 2]), &s, &AdjacencyConfig::new(3)).unwrap();
        assert_eq!(out[&1], Origin::Expanded { anchor: 0 });
        // equal distance: lower anchor index
        let s = parse_snippet("s", "a\nb\nc").unwrap();
        let out = expand_adjacency(&BTreeSet::from([0, 2]), &s, &AdjacencyConfig::new(1)).unwrap();
        assert_eq!(out[&1], Origin::Expanded { anchor: 0 });
    }

    #[test]
    fn rejects_bad_input() {
        let s = parse_snippet("s", "a b").unwrap();
        assert!(expand_adjacency(&BTreeSet::from([5]), &s, &AdjacencyConfig::new(1)).is_err());
        assert!(expand_adjacency(&BTreeSet::new(), &s, &AdjacencyConfig::new(4)).is_err());
        let wide = AdjacencyConfig {
            window_lines: 5,
            allow_wide: true,
        };
        assert!(expand_adjacency(&BTreeSet::new(), &s, &wide).is_ok());
    }

    #[test]
    fn label_sequence() {
        use SemanticLabel::*;
        let s = parse_snippet("s", "if x 42 y").unwrap();
        assert_eq!(
            fixation_label_sequence(&path(&[0, 1, 2]), &s).unwrap(),
            [Keyword, Identifier, Literal]
        );
        assert_eq!(
            fixation_label_sequence(&path(&[1, 1, 3]), &s).unwrap(),
            [Identifier, Identifier]
        );
        assert!(fixation_label_sequence(&path(&[]), &s).unwrap().is_empty());
    }

    #[test]
    fn scanpath_order_places_expansions_after_anchor() {
        let s = parse_snippet("s", "a = 1;\nb = 2;\nc = 3;").unwrap();
        // fixate `=` on line 2 (index 5), then `a` (index 0), then `=` again
        let sp = path(&[5, 0, 5]);
        let f: BTreeSet<usize> = [0, 5].into();
        let exp = expand_adjacency(&f, &s, &AdjacencyConfig::new(1)).unwrap();
        assert_eq!(augmented_order(&sp, &exp, MiningOrder::Scanpath), [5, 1, 9, 0, 4, 5]);
        assert_eq!(augmented_order(&sp, &exp, MiningOrder::Source), [0, 1, 4, 5, 9]);
    }
}
