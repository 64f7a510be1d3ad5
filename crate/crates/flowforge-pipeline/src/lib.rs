//! Manifest-driven batch orchestration for the flow dataset pipeline.
//!
//! The crate turns a user-supplied manifest of raw captures and anomaly
//! annotations into a hive-partitioned data tree, running per-day stages
//! (merge-annotations → split → flows → label → aggregate) plus the
//! period-level sample and preprocess steps, all cached by content hash
//! so reruns only redo what changed. Everything is deterministic: the
//! same root, manifest, seed, and flags produce byte-identical trees.

mod layout;
mod ledger;
mod manifest;
mod period;
mod stages;
mod stats;

pub use layout::Layout;
pub use ledger::{hash_file, Ledger, LedgerEntry, OutputRecord, LEDGER_FILE};
pub use manifest::{ingest_manifest, stage_raw, IngestReport, Manifest, ManifestEntry};
pub use period::{
    preprocess, sample_days, PeriodOutcome, PreprocessReport, PREPROCESS_REPORT, SAMPLE_PARQUET,
    SCALER_FILE, SPLIT_MANIFEST_FILE, TEST_PARQUET, TRAIN_PARQUET, VALIDATION_PARQUET,
};
pub use stages::{
    run_day, run_days, DayReport, Stage, StageAction, StageContext, StageRegistry, StageReport,
    DAILY_FLOWS,
};
pub use stats::{stats_table, stats_tree, table_label_counts, DayStats, StatsReport};

use flowforge_core::flowmeter::FlowMeterConfig;
use flowforge_core::splitter::SplitOptions;

/// Knobs shared by every stage of a pipeline invocation.
#[derive(Clone, Debug, Default)]
pub struct PipelineConfig {
    /// Base seed; stages derive isolated sub-seeds from it.
    pub seed: u64,
    pub flowmeter: FlowMeterConfig,
    pub split: SplitOptions,
}
