//! Fixation logs, token-level scanpaths and saccade locality.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::code::{Corpus, Snippet};
use crate::error::{Error, Result};

/// Default number of distinct tokens that receive a reading index.
pub const DEFAULT_READING_CAP: usize = 100;

/// Largest line window reported by [`locality_stats`].
pub const MAX_LOCALITY_WINDOW: usize = 5;

const FIXATION_COLUMNS: [&str; 5] = ["snippet_id", "seq", "line", "column", "duration_ms"];

/// A single fixation as logged by the tracker, in source coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationRecord {
    pub snippet_id: String,
    pub seq: u64,
    pub line: usize,
    pub column: usize,
    pub duration_ms: f64,
}

/// Parses the fixation CSV (`snippet_id,seq,line,column,duration_ms`).
///
/// Rows are returned sorted by `(snippet_id, seq)`. Error rows are reported
/// as file line numbers, so the first data row is row 2.
pub fn parse_fixation_csv(input: impl Read) -> Result<Vec<FixationRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(FIXATION_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::FixationRow {
                row: 1,
                message: format!("missing column `{name}`"),
            })?;
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for result in reader.records() {
        let record = result?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<&str> {
            record.get(cols[i]).ok_or_else(|| Error::FixationRow {
                row,
                message: format!("missing field `{}`", FIXATION_COLUMNS[i]),
            })
        };
        let bad = |i: usize, v: &str| Error::FixationRow {
            row,
            message: format!("invalid {} `{v}`", FIXATION_COLUMNS[i]),
        };
        let snippet_id = field(0)?.to_string();
        let seq_s = field(1)?;
        let seq: u64 = seq_s.parse().map_err(|_| bad(1, seq_s))?;
        let line_s = field(2)?;
        let line: usize = line_s.parse().ok().filter(|&l| l >= 1).ok_or_else(|| bad(2, line_s))?;
        let col_s = field(3)?;
        let column: usize = col_s.parse().ok().filter(|&c| c >= 1).ok_or_else(|| bad(3, col_s))?;
        let dur_s = field(4)?;
        let duration_ms: f64 = dur_s
            .parse()
            .ok()
            .filter(|d: &f64| d.is_finite() && *d >= 0.0)
            .ok_or_else(|| bad(4, dur_s))?;
        if !seen.insert((snippet_id.clone(), seq)) {
            return Err(Error::FixationRow {
                row,
                message: format!("duplicate seq {seq} for snippet `{snippet_id}`"),
            });
        }
        records.push(FixationRecord {
            snippet_id,
            seq,
            line,
            column,
            duration_ms,
        });
    }
    records.sort_by(|a, b| a.snippet_id.cmp(&b.snippet_id).then(a.seq.cmp(&b.seq)));
    Ok(records)
}

pub fn write_fixation_csv(records: &[FixationRecord], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(FIXATION_COLUMNS)?;
    for r in records {
        writer.write_record([
            r.snippet_id.clone(),
            r.seq.to_string(),
            r.line.to_string(),
            r.column.to_string(),
            r.duration_ms.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::io("<fixations>", e))?;
    Ok(())
}

/// Splits sorted records into per-snippet groups.
pub fn group_by_snippet(records: Vec<FixationRecord>) -> BTreeMap<String, Vec<FixationRecord>> {
    let mut groups: BTreeMap<String, Vec<FixationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.snippet_id.clone()).or_default().push(r);
    }
    for group in groups.values_mut() {
        group.sort_by_key(|r| r.seq);
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationEvent {
    pub token_index: usize,
    pub duration_ms: f64,
}

/// Time-ordered token fixations over one snippet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scanpath {
    pub snippet_id: String,
    pub events: Vec<FixationEvent>,
    pub unmapped_count: usize,
}

impl Scanpath {
    pub fn token_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.events.iter().map(|e| e.token_index)
    }

    pub fn validate(&self, snippet: &Snippet) -> Result<()> {
        if self.snippet_id != snippet.id {
            return Err(Error::Invalid(format!(
                "scanpath for `{}` applied to snippet `{}`",
                self.snippet_id, snippet.id
            )));
        }
        self.token_indices().try_for_each(|i| snippet.check_index(i))
    }
}

/// Resolves each fixation to a token: the token containing the column, else
/// the nearest token on that line (leftmost on ties). Fixations on lines
/// without tokens are dropped and counted.
pub fn map_fixations_to_tokens(records: &[FixationRecord], snippet: &Snippet) -> Result<Scanpath> {
    let mut sorted: Vec<&FixationRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.seq);
    let mut events = Vec::with_capacity(sorted.len());
    let mut unmapped_count = 0;
    for r in sorted {
        if r.snippet_id != snippet.id {
            return Err(Error::Invalid(format!(
                "fixation for `{}` mapped against snippet `{}`",
                r.snippet_id, snippet.id
            )));
        }
        let nearest = snippet
            .tokens
            .iter()
            .filter_map(|t| t.column_distance(r.line, r.column).map(|d| (d, t.index)))
            .min();
        match nearest {
            Some((_, token_index)) => events.push(FixationEvent {
                token_index,
                duration_ms: r.duration_ms,
            }),
            None => unmapped_count += 1,
        }
    }
    Ok(Scanpath {
        snippet_id: snippet.id.clone(),
        events,
        unmapped_count,
    })
}

/// Maps every fixation group against the corpus, in snippet-id order.
pub fn map_corpus(corpus: &Corpus, records: Vec<FixationRecord>) -> Result<Vec<Scanpath>> {
    group_by_snippet(records)
        .into_iter()
        .map(|(id, group)| map_fixations_to_tokens(&group, corpus.require(&id)?))
        .collect()
}

/// The distinct fixated token indices, F.
pub fn fixated_set(scanpath: &Scanpath) -> BTreeSet<usize> {
    scanpath.token_indices().collect()
}

/// First-fixation order of the first `cap` distinct tokens, starting at 0.
pub fn reading_order(scanpath: &Scanpath, cap: usize) -> BTreeMap<usize, usize> {
    let mut order = BTreeMap::new();
    for token in scanpath.token_indices() {
        if order.len() >= cap {
            break;
        }
        let next = order.len();
        order.entry(token).or_insert(next);
    }
    order
}

/// Share of consecutive fixation pairs whose line distance is at most N,
/// for N in `0..=MAX_LOCALITY_WINDOW`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityReport {
    pub within: Vec<usize>,
    pub transitions: usize,
}

impl LocalityReport {
    pub fn fraction(&self, window: usize) -> f64 {
        self.within[window] as f64 / self.transitions as f64
    }

    pub fn fractions(&self) -> Vec<f64> {
        (0..self.within.len()).map(|n| self.fraction(n)).collect()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["window", "fraction", "transitions"])?;
        for n in 0..self.within.len() {
            writer.write_record([
                n.to_string(),
                self.fraction(n).to_string(),
                self.transitions.to_string(),
            ])?;
        }
        writer.flush().map_err(|e| Error::io("<locality>", e))?;
        Ok(())
    }
}

pub fn locality_stats(scanpaths: &[Scanpath], corpus: &Corpus) -> Result<LocalityReport> {
    let mut within = vec![0usize; MAX_LOCALITY_WINDOW + 1];
    let mut transitions = 0;
    for path in scanpaths {
        let snippet = corpus.require(&path.snippet_id)?;
        path.validate(snippet)?;
        let lines: Vec<usize> = path.token_indices().map(|i| snippet.tokens[i].line).collect();
        for pair in lines.windows(2) {
            let delta = pair[0].abs_diff(pair[1]);
            transitions += 1;
            for (n, count) in within.iter_mut().enumerate() {
                if delta <= n {
                    *count += 1;
                }
            }
        }
    }
    if transitions == 0 {
        return Err(Error::Invalid("no fixation transitions to measure".into()));
    }
    Ok(LocalityReport { within, transitions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::parse_snippet;

    fn path(id: &str, tokens: &[usize]) -> Scanpath {
        Scanpath {
            snippet_id: id.into(),
            events: tokens
                .iter()
                .map(|&token_index| FixationEvent {
                    token_index,
                    duration_ms: 200.0,
                })
                .collect(),
            unmapped_count: 0,
        }
    }

    fn fix(seq: u64, line: usize, column: usize) -> FixationRecord {
        FixationRecord {
            snippet_id: "s".into(),
            seq,
            line,
            column,
            duration_ms: 100.0,
        }
    }

    #[test]
    fn parses_well_formed_rows() {
        let csv = "snippet_id,seq,line,column,duration_ms\na,0,1,1,200\na,1,2,3,150.5\nb,0,1,1,0\n";
        let records = parse_fixation_csv(csv.as_bytes()).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[1].duration_ms, 150.5);
    }

    #[test]
    fn negative_duration_reports_row() {
        let csv = "snippet_id,seq,line,column,duration_ms\na,0,1,1,-5\n";
        match parse_fixation_csv(csv.as_bytes()) {
            Err(Error::FixationRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_rows() {
        let missing = "snippet_id,seq,line,duration_ms\na,0,1,5\n";
        assert!(matches!(
            parse_fixation_csv(missing.as_bytes()),
            Err(Error::FixationRow { row: 1, .. })
        ));
        let non_numeric = "snippet_id,seq,line,column,duration_ms\na,0,1,1,5\na,x,1,1,5\n";
        assert!(matches!(
            parse_fixation_csv(non_numeric.as_bytes()),
            Err(Error::FixationRow { row: 3, .. })
        ));
        let dup = "snippet_id,seq,line,column,duration_ms\na,0,1,1,5\nb,0,1,1,5\na,0,2,1,5\n";
        assert!(matches!(
            parse_fixation_csv(dup.as_bytes()),
            Err(Error::FixationRow { row: 4, .. })
        ));
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let csv = "snippet_id,seq,line,column,duration_ms\nb,1,1,1,1\na,2,1,1,1\na,0,1,1,1\nb,0,1,1,1\na,1,1,1,1\n";
        let got: Vec<_> = parse_fixation_csv(csv.as_bytes())
            .unwrap()
            .into_iter()
            .map(|r| (r.snippet_id, r.seq))
            .collect();
        let mut expected = got.clone();
        expected.sort();
        assert_eq!(got, expected);
        assert_eq!(got[0], ("a".to_string(), 0));
    }

    #[test]
    fn mapping_rules() {
        // line 1: `ab   cd`, line 2 blank, line 3: `x`
        let snippet = parse_snippet("s", "ab   cd\n\nx").unwrap();
        let records = [fix(0, 1, 2), fix(1, 1, 4), fix(2, 2, 1), fix(3, 1, 5), fix(4, 3, 9)];
        let sp = map_fixations_to_tokens(&records, &snippet).unwrap();
        let got: Vec<_> = sp.token_indices().collect();
        // column 4 is equidistant from `ab` (ends 2) and `cd` (starts 6): leftmost wins
        assert_eq!(got, [0, 0, 1, 2]);
        assert_eq!(sp.unmapped_count, 1);
    }

    #[test]
    fn mapping_rejects_foreign_records() {
        let snippet = parse_snippet("other", "x").unwrap();
        assert!(map_fixations_to_tokens(&[fix(0, 1, 1)], &snippet).is_err());
    }

    #[test]
    fn fixated_set_dedups() {
        assert_eq!(fixated_set(&path("s", &[3, 5, 3])), BTreeSet::from([3, 5]));
        assert!(fixated_set(&path("s", &[])).is_empty());
    }

    #[test]
    fn reading_order_first_encounter() {
        let order = reading_order(&path("s", &[7, 2, 7, 9]), 100);
        assert_eq!(order, BTreeMap::from([(7, 0), (2, 1), (9, 2)]));
        assert!(reading_order(&path("s", &[]), 100).is_empty());
        let many: Vec<usize> = (0..150).collect();
        let capped = reading_order(&path("s", &many), 100);
        assert_eq!(capped.len(), 100);
        assert_eq!(capped.values().max(), Some(&99));
        assert!(!capped.contains_key(&100));
    }

    #[test]
    fn locality_hand_count() {
        // tokens on lines 1, 1, 2, 6
        let snippet = parse_snippet("s", "a b\nc\n\n\n\nd").unwrap();
        let corpus = Corpus::from_snippets([snippet]).unwrap();
        let report = locality_stats(&[path("s", &[0, 1, 2, 3])], &corpus).unwrap();
        assert_eq!(report.transitions, 3);
        assert!((report.fraction(3) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.fraction(0), 1.0 / 3.0);
        assert_eq!(report.fraction(4), 1.0);
    }

    #[test]
    fn locality_single_line_and_empty() {
        let corpus = Corpus::from_snippets([parse_snippet("s", "a b c").unwrap()]).unwrap();
        let report = locality_stats(&[path("s", &[0, 2, 1])], &corpus).unwrap();
        assert!(report.fractions().iter().all(|&f| f == 1.0));
        assert!(locality_stats(&[path("s", &[1])], &corpus).is_err());
    }

    #[test]
    fn locality_csv() {
        let report = LocalityReport {
            within: vec![1, 2, 2, 4, 4, 4],
            transitions: 4,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("window,fraction,transitions"));
        assert_eq!(text.lines().nth(1), Some("0,0.25,4"));
        assert_eq!(text.lines().count(), 7);
    }
}
