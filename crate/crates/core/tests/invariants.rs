use std::collections::BTreeSet;

use gazeattn::augment::{expand_adjacency, AdjacencyConfig, Origin};
use gazeattn::code::{parse_snippet, tokenize};
use gazeattn::eval::{class_counts, score_classes, LabelFamily};
use gazeattn::gaze::{parse_fixation_csv, reading_order, write_fixation_csv, FixationEvent, FixationRecord, Scanpath};
use gazeattn::reward::{hard_reward, LabeledSequence, RewardWeights};
use proptest::prelude::*;

const PIECES: &[&str] = &[
    "int",
    "x",
    "=",
    "3.5e2",
    ";",
    "while",
    "(",
    ")",
    "{",
    "}",
    "a1",
    ">>>=",
    "\"str\\\"q\"",
    "'\\n'",
    "/* c */",
    "0x1F",
    "@",
    "...",
    "null",
];

fn source() -> impl Strategy<Value = String> {
    prop::collection::vec((0..PIECES.len(), prop::bool::weighted(0.2)), 0..60).prop_map(|parts| {
        let mut s = String::new();
        for (i, newline) in parts {
            s.push_str(PIECES[i]);
            s.push(if newline { '\n' } else { ' ' });
        }
        s
    })
}

fn labeled(max: usize) -> impl Strategy<Value = LabeledSequence> {
    (1..30usize).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::option::of(1..=max as u32), n),
            prop::collection::vec(prop::option::of(0..max), n),
        )
            .prop_map(|(pattern, position)| LabeledSequence { pattern, position })
    })
}

proptest! {
    #[test]
    fn token_spans_cover_source(src in source()) {
        let tokens = tokenize(&src).unwrap();
        let mut last = 0;
        for t in &tokens {
            prop_assert_eq!(&src[t.byte_start..t.byte_end], t.text.as_str());
            prop_assert!(src[last..t.byte_start].trim().is_empty());
            last = t.byte_end;
        }
        prop_assert!(src[last..].trim().is_empty());
    }

    #[test]
    fn expansion_grows_with_window(src in source(), picks in prop::collection::vec(any::<prop::sample::Index>(), 0..10)) {
        let snippet = parse_snippet("p", &src).unwrap();
        prop_assume!(!snippet.is_empty());
        let fixated: BTreeSet<usize> = picks.iter().map(|p| p.index(snippet.len())).collect();
        let mut previous: Option<BTreeSet<usize>> = None;
        for w in 0..=3 {
            let got = expand_adjacency(&fixated, &snippet, &AdjacencyConfig::new(w)).unwrap();
            for (&i, origin) in &got {
                match origin {
                    Origin::Fixated => prop_assert!(fixated.contains(&i)),
                    Origin::Expanded { anchor } => {
                        prop_assert!(fixated.contains(anchor));
                        prop_assert_eq!(snippet.tokens[i].label, snippet.tokens[*anchor].label);
                    }
                }
            }
            let keys: BTreeSet<usize> = got.keys().copied().collect();
            prop_assert!(fixated.is_subset(&keys));
            if let Some(prev) = &previous {
                prop_assert!(prev.is_subset(&keys));
            }
            previous = Some(keys);
        }
    }

    #[test]
    fn reward_bounds(gold in labeled(5), noise in prop::collection::vec(any::<bool>(), 30)) {
        let w = RewardWeights::default();
        prop_assert_eq!(hard_reward(&gold, &gold, &w).unwrap().value, 0.0);
        let mut pred = gold.clone();
        for (i, flip) in noise.iter().enumerate().take(pred.len()) {
            if *flip {
                pred.pattern[i] = None;
                pred.position[i] = None;
            }
        }
        let r = hard_reward(&pred, &gold, &w).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn macro_f1_between_class_extremes(gold in labeled(4), pred in labeled(4)) {
        let n = gold.len().min(pred.len());
        let g: Vec<usize> = LabelFamily::Pattern.classes(&gold)[..n].to_vec();
        let p: Vec<usize> = LabelFamily::Pattern.classes(&pred)[..n].to_vec();
        prop_assume!(g.iter().any(|&c| c != 0));
        let row = score_classes(&p, &g, LabelFamily::Pattern).unwrap();
        let f1s: Vec<f64> = class_counts(&p, &g).unwrap().values().map(|c| c.f1()).collect();
        let lo = f1s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = f1s.iter().cloned().fold(0.0, f64::max);
        prop_assert!(row.f1 >= lo - 1e-12 && row.f1 <= hi + 1e-12);
    }

    #[test]
    fn reading_order_is_dense(tokens in prop::collection::vec(0..40usize, 1..80), cap in 1..50usize) {
        let scanpath = Scanpath {
            snippet_id: "s".into(),
            events: tokens.iter().map(|&t| FixationEvent { token_index: t, duration_ms: 100.0 }).collect(),
            unmapped_count: 0,
        };
        let order = reading_order(&scanpath, cap);
        let distinct: BTreeSet<usize> = tokens.iter().copied().collect();
        prop_assert_eq!(order.len(), distinct.len().min(cap));
        let mut ranks: Vec<usize> = order.values().copied().collect();
        ranks.sort();
        prop_assert_eq!(ranks, (0..order.len()).collect::<Vec<_>>());
        prop_assert_eq!(order.get(&tokens[0]), Some(&0));
    }

    #[test]
    fn fixation_csv_round_trip(rows in prop::collection::vec((0..3u8, 1..20usize, 1..80usize, 0..2000u32), 0..30)) {
        let mut records: Vec<FixationRecord> = rows
            .iter()
            .enumerate()
            .map(|(seq, &(s, line, column, d))| FixationRecord {
                snippet_id: format!("s{s}"),
                seq: seq as u64,
                line,
                column,
                duration_ms: d as f64 / 4.0,
            })
            .collect();
        records.sort_by(|a, b| (&a.snippet_id, a.seq).cmp(&(&b.snippet_id, b.seq)));
        let mut buf = Vec::new();
        write_fixation_csv(&records, &mut buf).unwrap();
        prop_assert_eq!(parse_fixation_csv(&buf[..]).unwrap(), records);
    }
}
