//! Fixated set to augmented set: adjacency expansion, k-gram patterns and
//! per-token (pattern, reading index) labels.

mod dataset;
mod expand;
mod kgram;

pub use dataset::{
    attach_reading_indices, build_augmented_dataset, missing_tokens, read_dataset_jsonl, write_dataset_jsonl,
    AugmentConfig, AugmentedDataset, AugmentedRow, AugmentedSnippet, AugmentedToken, OriginKind,
};
pub use expand::{
    augmented_order, expand_adjacency, fixation_label_sequence, AdjacencyConfig, MiningOrder, Origin, MAX_WINDOW_LINES,
};
pub use kgram::{
    assign_pattern_labels, merge_counts, mine_kgrams, select_top_patterns, KGramCounts, KGramPattern, PatternTable,
    DEFAULT_TOP_PATTERNS,
};
