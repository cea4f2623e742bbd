//! Dataset rows, ingestion with quarantine, splits and evaluation metrics.

mod baseline;
mod error;
mod ingest;
mod metrics;
mod splits;
pub mod synth;

pub use baseline::MajorityBaseline;
pub use error::{DataError, Result};
pub use ingest::{
    align_query, ingest, ingest_reader, normalize_molecule, reaction_key, write_quarantine, DatasetRow, Ingested,
    QuarantineEntry, Schema, Target,
};
pub use metrics::{
    component_topk, regression_metrics, topk_accuracy, Combo, Component, RegressionMetrics, TopkReport,
};
pub use splits::{make_splits, read_split_file, Split, SplitSpec};
