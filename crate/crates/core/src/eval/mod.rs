//! Frozen-embedding evaluation: dataset embedding, the k-fold linear probe,
//! experiment runs and pairwise distinguishability reports.

mod experiment;
mod probe;
mod report;

pub use experiment::{
    metrics_csv, run_experiment, variant_preset, DatasetSource, ExperimentOutcome, ExperimentSpec, MetricRow, Variant,
    METRICS_HEADER,
};
pub use probe::{linear_probe, stratified_folds, ProbeResult, PROBE_L2, PROBE_MAX_ITERATIONS, PROBE_TOLERANCE};
pub use report::{distinguish_report, embed_dataset, DistinguishReport, Verdict, EMBEDDING_TOLERANCE, INVARIANT_TOLERANCE};
