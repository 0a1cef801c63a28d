use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::expand::{augmented_order, expand_adjacency, AdjacencyConfig, MiningOrder, Origin};
use super::kgram::{assign_pattern_labels, mine_kgrams, select_top_patterns, PatternTable, DEFAULT_TOP_PATTERNS};
use crate::code::{Corpus, SemanticLabel};
use crate::error::{Error, Result};
use crate::gaze::{fixated_set, reading_order, Scanpath, DEFAULT_READING_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub adjacency: AdjacencyConfig,
    pub top_patterns: usize,
    pub reading_cap: usize,
    pub k_values: Vec<usize>,
    pub mining_order: MiningOrder,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            adjacency: AdjacencyConfig::default(),
            top_patterns: DEFAULT_TOP_PATTERNS,
            reading_cap: DEFAULT_READING_CAP,
            k_values: vec![2, 3],
            mining_order: MiningOrder::Scanpath,
        }
    }
}

impl AugmentConfig {
    pub fn with_window(window_lines: usize) -> Self {
        AugmentConfig {
            adjacency: AdjacencyConfig::new(window_lines),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentedToken {
    pub token_index: usize,
    pub origin: Origin,
    pub pattern_label: Option<u32>,
    pub reading_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedSnippet {
    pub id: String,
    /// Source order.
    pub tokens: Vec<AugmentedToken>,
}

/// The augmented set of every snippet that has at least one fixation, plus the
/// corpus-wide pattern table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AugmentedDataset {
    pub snippets: Vec<AugmentedSnippet>,
    pub patterns: PatternTable,
}

impl AugmentedDataset {
    pub fn token_count(&self) -> usize {
        self.snippets.iter().map(|s| s.tokens.len()).sum()
    }

    pub fn get(&self, id: &str) -> Option<&AugmentedSnippet> {
        self.snippets
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.snippets[i])
    }
}

/// Reading index per augmented token: fixated tokens keep their own, expanded
/// tokens inherit their anchor's. Tokens past the cap get none.
pub fn attach_reading_indices(
    expansion: &BTreeMap<usize, Origin>,
    order: &BTreeMap<usize, usize>,
) -> BTreeMap<usize, Option<usize>> {
    expansion
        .iter()
        .map(|(&i, origin)| {
            let source = origin.anchor().unwrap_or(i);
            (i, order.get(&source).copied())
        })
        .collect()
}

/// Runs the whole augmentation over a corpus: fixated set, adjacency
/// expansion, corpus-wide k-gram ranking, then per-token labels.
pub fn build_augmented_dataset(
    corpus: &Corpus,
    scanpaths: &[Scanpath],
    config: &AugmentConfig,
) -> Result<AugmentedDataset> {
    config.adjacency.validate()?;
    let mut sorted: Vec<&Scanpath> = scanpaths.iter().collect();
    sorted.sort_by(|a, b| a.snippet_id.cmp(&b.snippet_id));
    for pair in sorted.windows(2) {
        if pair[0].snippet_id == pair[1].snippet_id {
            return Err(Error::Invalid(format!(
                "more than one scanpath for `{}`",
                pair[0].snippet_id
            )));
        }
    }

    struct Stage<'a> {
        scanpath: &'a Scanpath,
        labels: Vec<SemanticLabel>,
        expansion: BTreeMap<usize, Origin>,
        walk: Vec<usize>,
    }

    let mut stages = Vec::with_capacity(sorted.len());
    for scanpath in sorted {
        let snippet = corpus.require(&scanpath.snippet_id)?;
        scanpath.validate(snippet)?;
        let fixated = fixated_set(scanpath);
        let expansion = expand_adjacency(&fixated, snippet, &config.adjacency)?;
        let walk = augmented_order(scanpath, &expansion, config.mining_order);
        stages.push(Stage {
            scanpath,
            labels: snippet.tokens.iter().map(|t| t.label).collect(),
            expansion,
            walk,
        });
    }

    let sequences: Vec<Vec<SemanticLabel>> = stages
        .iter()
        .map(|s| s.walk.iter().map(|&i| s.labels[i]).collect())
        .collect();
    let counts = mine_kgrams(&sequences, &config.k_values);
    let patterns = if counts.is_empty() {
        PatternTable::default()
    } else {
        select_top_patterns(&counts, config.top_patterns)?
    };

    let mut snippets = Vec::new();
    for stage in stages {
        if stage.expansion.is_empty() {
            continue;
        }
        let pattern_labels = assign_pattern_labels(&stage.walk, &stage.labels, &patterns);
        let order = reading_order(stage.scanpath, config.reading_cap);
        let reading = attach_reading_indices(&stage.expansion, &order);
        let tokens = stage
            .expansion
            .iter()
            .map(|(&i, &origin)| AugmentedToken {
                token_index: i,
                origin,
                pattern_label: pattern_labels.get(&i).copied(),
                reading_index: reading[&i],
            })
            .collect();
        snippets.push(AugmentedSnippet {
            id: stage.scanpath.snippet_id.clone(),
            tokens,
        });
    }
    Ok(AugmentedDataset { snippets, patterns })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OriginKind {
    Fixated,
    Expanded,
}

/// One JSONL line of the serialized dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedRow {
    pub snippet_id: String,
    pub token_index: usize,
    pub text: String,
    pub line: usize,
    pub semantic_label: SemanticLabel,
    pub origin: OriginKind,
    pub anchor_index: Option<usize>,
    pub pattern_label: Option<u32>,
    pub reading_index: Option<usize>,
}

pub fn write_dataset_jsonl(dataset: &AugmentedDataset, corpus: &Corpus, mut out: impl Write) -> Result<()> {
    for s in &dataset.snippets {
        let snippet = corpus.require(&s.id)?;
        for t in &s.tokens {
            let token = &snippet.tokens[t.token_index];
            let row = AugmentedRow {
                snippet_id: s.id.clone(),
                token_index: t.token_index,
                text: token.text.clone(),
                line: token.line,
                semantic_label: token.label,
                origin: match t.origin {
                    Origin::Fixated => OriginKind::Fixated,
                    Origin::Expanded { .. } => OriginKind::Expanded,
                },
                anchor_index: t.origin.anchor(),
                pattern_label: t.pattern_label,
                reading_index: t.reading_index,
            };
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n").map_err(|e| Error::io("<dataset>", e))?;
        }
    }
    Ok(())
}

/// Rebuilds a dataset from its JSONL rows and pattern table.
pub fn read_dataset_jsonl(input: impl BufRead, patterns: PatternTable) -> Result<AugmentedDataset> {
    let mut groups: BTreeMap<String, BTreeMap<usize, AugmentedToken>> = BTreeMap::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<dataset>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: AugmentedRow = serde_json::from_str(&line)?;
        let origin = match (row.origin, row.anchor_index) {
            (OriginKind::Fixated, None) => Origin::Fixated,
            (OriginKind::Expanded, Some(anchor)) => Origin::Expanded { anchor },
            _ => {
                return Err(Error::Invalid(format!(
                    "dataset line {}: origin and anchor_index disagree",
                    n + 1
                )))
            }
        };
        if let Some(label) = row.pattern_label {
            if !patterns.contains_label(label) {
                return Err(Error::Invalid(format!(
                    "dataset line {}: pattern label {label} not in table",
                    n + 1
                )));
            }
        }
        let token = AugmentedToken {
            token_index: row.token_index,
            origin,
            pattern_label: row.pattern_label,
            reading_index: row.reading_index,
        };
        if groups
            .entry(row.snippet_id)
            .or_default()
            .insert(row.token_index, token)
            .is_some()
        {
            return Err(Error::Invalid(format!("dataset line {}: duplicate token", n + 1)));
        }
    }
    Ok(AugmentedDataset {
        snippets: groups
            .into_iter()
            .map(|(id, tokens)| AugmentedSnippet {
                id,
                tokens: tokens.into_values().collect(),
            })
            .collect(),
        patterns,
    })
}

/// Tokens present in window-`narrow` output but missing from window-`wide`.
/// Empty whenever expansion is monotone in the window.
pub fn missing_tokens(narrow: &AugmentedDataset, wide: &AugmentedDataset) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for s in &narrow.snippets {
        let have: BTreeSet<usize> = wide
            .get(&s.id)
            .map(|w| w.tokens.iter().map(|t| t.token_index).collect())
            .unwrap_or_default();
        out.extend(
            s.tokens
                .iter()
                .filter(|t| !have.contains(&t.token_index))
                .map(|t| (s.id.clone(), t.token_index)),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::parse_snippet;
    use crate::gaze::FixationEvent;

    fn path(id: &str, tokens: &[usize]) -> Scanpath {
        Scanpath {
            snippet_id: id.into(),
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
    fn reading_index_inheritance() {
        let expansion = BTreeMap::from([
            (1, Origin::Fixated),
            (2, Origin::Expanded { anchor: 1 }),
            (7, Origin::Fixated),
            (8, Origin::Expanded { anchor: 7 }),
        ]);
        let order = BTreeMap::from([(1, 4)]);
        let got = attach_reading_indices(&expansion, &order);
        assert_eq!(got, BTreeMap::from([(1, Some(4)), (2, Some(4)), (7, None), (8, None)]));
    }

    #[test]
    fn empty_scanpath_gives_empty_dataset() {
        let corpus = Corpus::from_snippets([parse_snippet("a", "int x = 1;").unwrap()]).unwrap();
        let ds = build_augmented_dataset(&corpus, &[path("a", &[])], &AugmentConfig::default()).unwrap();
        assert_eq!(ds.token_count(), 0);
        assert!(ds.patterns.is_empty());
    }

    #[test]
    fn unknown_snippet_rejected() {
        let corpus = Corpus::from_snippets([parse_snippet("a", "x").unwrap()]).unwrap();
        assert!(matches!(
            build_augmented_dataset(&corpus, &[path("b", &[0])], &AugmentConfig::default()),
            Err(Error::UnknownSnippet(_))
        ));
        assert!(
            build_augmented_dataset(&corpus, &[path("a", &[0]), path("a", &[0])], &AugmentConfig::default()).is_err()
        );
    }

    #[test]
    fn small_pipeline_labels() {
        use SemanticLabel::*;
        // line 1: int a = 1 ;   line 2: int b = 2 ;
        let corpus = Corpus::from_snippets([parse_snippet("a", "int a = 1;\nint b = 2;").unwrap()]).unwrap();
        let sp = path("a", &[0, 1, 2]);
        let ds = build_augmented_dataset(&corpus, &[sp], &AugmentConfig::with_window(1)).unwrap();
        // walk: int(0) int(5) a(1) b(6) =(2) =(7)
        let top = &ds.patterns.patterns()[0];
        assert_eq!(top.frequency, 1);
        assert_eq!(top.labels.len(), 3);
        let rows: Vec<_> = ds.snippets[0]
            .tokens
            .iter()
            .map(|t| (t.token_index, t.reading_index))
            .collect();
        assert_eq!(
            rows,
            [
                (0, Some(0)),
                (1, Some(1)),
                (2, Some(2)),
                (5, Some(0)),
                (6, Some(1)),
                (7, Some(2))
            ]
        );
        assert!(ds.snippets[0].tokens.iter().all(|t| t.pattern_label.is_some()));
        assert_eq!(ds.patterns.label_of(&[Keyword, Keyword, Identifier]), Some(1));
    }

    #[test]
    fn jsonl_round_trip() {
        let corpus = Corpus::from_snippets([
            parse_snippet("a", "int a = 1;\nint b = 2;").unwrap(),
            parse_snippet("b", "if (x) { y = x; }").unwrap(),
        ])
        .unwrap();
        let paths = [path("a", &[0, 1, 2, 6]), path("b", &[0, 2, 5, 7])];
        let ds = build_augmented_dataset(&corpus, &paths, &AugmentConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_dataset_jsonl(&ds, &corpus, &mut buf).unwrap();
        let back = read_dataset_jsonl(buf.as_slice(), ds.patterns.clone()).unwrap();
        assert_eq!(back, ds);
        let first: AugmentedRow =
            serde_json::from_str(String::from_utf8(buf).unwrap().lines().next().unwrap()).unwrap();
        assert_eq!(first.snippet_id, "a");
        assert_eq!(first.origin, OriginKind::Fixated);
    }
}
