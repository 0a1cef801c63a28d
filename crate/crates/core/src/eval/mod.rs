//! Label metrics and the window / training-progress sweeps.

mod metrics;
mod sweep;

pub use metrics::{
    class_counts, majority_class_baseline, score_classes, score_labels, ClassCounts, LabelFamily, MetricRow,
};
pub use sweep::{adjacency_sweep, progress_sweep, read_report, SweepReport, SweepRow, SweepSetup};
