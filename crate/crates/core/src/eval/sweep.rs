use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::metrics::{LabelFamily, MetricRow};
use crate::augment::{build_augmented_dataset, AdjacencyConfig, AugmentConfig};
use crate::code::Corpus;
use crate::error::{Error, Result};
use crate::gaze::Scanpath;
use crate::model::{Example, Model, ModelConfig};
use crate::train::{build_examples, evaluate, split_dataset, train, TrainConfig};

/// Everything a sweep point needs besides the swept value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSetup {
    pub augment: AugmentConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Window in lines, or batch ratio.
    pub window_or_ratio: f64,
    pub family: LabelFamily,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub is_baseline: bool,
}

impl SweepRow {
    pub fn new(key: f64, row: MetricRow, is_baseline: bool) -> Self {
        SweepRow {
            window_or_ratio: key,
            family: row.family,
            precision: row.precision,
            recall: row.recall,
            f1: row.f1,
            support: row.support,
            is_baseline,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn from_rows(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|a, b| {
            a.window_or_ratio
                .total_cmp(&b.window_or_ratio)
                .then(a.family.cmp(&b.family))
                .then(a.is_baseline.cmp(&b.is_baseline))
        });
        SweepReport { rows }
    }

    pub fn find(&self, key: f64, family: LabelFamily, is_baseline: bool) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.window_or_ratio == key && r.family == family && r.is_baseline == is_baseline)
    }

    /// CSV with header `window_or_ratio,family,precision,recall,f1,support,is_baseline`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "window_or_ratio",
                "family",
                "precision",
                "recall",
                "f1",
                "support",
                "is_baseline",
            ])?;
        }
        w.flush().map_err(|e| Error::io("<report>", e))?;
        Ok(())
    }
}

pub fn read_report<R: Read>(input: R) -> Result<SweepReport> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?;
    Ok(SweepReport { rows })
}

fn split_examples(
    corpus: &Corpus,
    scanpaths: &[Scanpath],
    augment: &AugmentConfig,
    setup: &SweepSetup,
) -> Result<(Vec<Example>, Vec<Example>)> {
    let dataset = build_augmented_dataset(corpus, scanpaths, augment)?;
    let examples = build_examples(corpus, &dataset)?;
    split_dataset(&examples, setup.train.split_ratio, setup.train.seed)
}

fn train_and_score(
    train_set: &[Example],
    test_set: &[Example],
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<(MetricRow, MetricRow)> {
    let mut m = Model::new(model.clone())?;
    train(&mut m, train_set, None, config)?;
    evaluate(&m, test_set)
}

/// Trains one model per window and scores the held-out split. A second
/// window-0 model trained without the reward term is reported as the
/// baseline.
pub fn adjacency_sweep(
    corpus: &Corpus,
    scanpaths: &[Scanpath],
    windows: &[usize],
    setup: &SweepSetup,
) -> Result<SweepReport> {
    if windows.is_empty() {
        return Err(Error::Config("no windows to sweep".into()));
    }
    let mut rows = Vec::new();
    let mut add = |key: usize, (p, q): (MetricRow, MetricRow), base: bool| {
        rows.push(SweepRow::new(key as f64, p, base));
        rows.push(SweepRow::new(key as f64, q, base));
    };
    for &w in windows {
        let augment = AugmentConfig {
            adjacency: AdjacencyConfig {
                window_lines: w,
                ..setup.augment.adjacency
            },
            ..setup.augment.clone()
        };
        augment.adjacency.validate()?;
        let (tr, te) = split_examples(corpus, scanpaths, &augment, setup)?;
        log::info!("window {w}: {} train / {} held-out snippets", tr.len(), te.len());
        add(w, train_and_score(&tr, &te, &setup.model, &setup.train)?, false);
    }
    let augment = AugmentConfig {
        adjacency: AdjacencyConfig {
            window_lines: 0,
            ..setup.augment.adjacency
        },
        ..setup.augment.clone()
    };
    let (tr, te) = split_examples(corpus, scanpaths, &augment, setup)?;
    let baseline = TrainConfig {
        alpha: 0.0,
        ..setup.train.clone()
    };
    add(0, train_and_score(&tr, &te, &setup.model, &baseline)?, true);
    Ok(SweepReport::from_rows(rows))
}

/// One training run at `setup.augment`, scored on the held-out split at each
/// checkpoint ratio of `setup.train`.
pub fn progress_sweep(corpus: &Corpus, scanpaths: &[Scanpath], setup: &SweepSetup) -> Result<SweepReport> {
    if setup.train.checkpoints.is_empty() {
        return Err(Error::Config("no checkpoint ratios".into()));
    }
    let (tr, te) = split_examples(corpus, scanpaths, &setup.augment, setup)?;
    let mut model = Model::new(setup.model.clone())?;
    let history = train(&mut model, &tr, Some(&te), &setup.train)?;
    let mut rows = Vec::new();
    for c in &history.checkpoints {
        rows.push(SweepRow::new(c.ratio, c.pattern, false));
        rows.push(SweepRow::new(c.ratio, c.positional, false));
    }
    Ok(SweepReport::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(key: f64, family: LabelFamily, base: bool) -> SweepRow {
        SweepRow {
            window_or_ratio: key,
            family,
            precision: 0.25,
            recall: 1.0 / 3.0,
            f1: 0.1,
            support: 4,
            is_baseline: base,
        }
    }

    #[test]
    fn report_round_trip_and_order() {
        let report = SweepReport::from_rows(vec![
            row(1.0, LabelFamily::Positional, false),
            row(0.0, LabelFamily::Pattern, true),
            row(0.0, LabelFamily::Pattern, false),
            row(0.2, LabelFamily::Pattern, false),
        ]);
        assert_eq!(report.rows[0], row(0.0, LabelFamily::Pattern, false));
        assert_eq!(report.rows[1], row(0.0, LabelFamily::Pattern, true));
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("window_or_ratio,family,precision,recall,f1,support,is_baseline\n0.0,semantic-pattern,")
        );
        assert_eq!(read_report(&buf[..]).unwrap(), report);
        assert!(report.find(0.2, LabelFamily::Pattern, false).is_some());
    }

    #[test]
    fn empty_report_has_header() {
        let mut buf = Vec::new();
        SweepReport::default().write_csv(&mut buf).unwrap();
        assert_eq!(read_report(&buf[..]).unwrap().rows.len(), 0);
    }
}
