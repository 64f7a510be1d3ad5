//! Core library for turning raw packet captures plus per-day anomaly
//! annotations into labeled, CICFlowMeter-v3-compatible flow datasets.
//!
//! The crate is organized along the batch pipeline:
//!
//! * [`capture`] — classic pcap read/write (both endiannesses, µs/ns
//!   resolution, transparent gzip) and packet dissection.
//! * [`annotations`] — CSV and ADMD XML anomaly annotations, merged into a
//!   unified per-day table.
//! * [`labeling`] — Simpson overlap index and the distance-based label rule.
//! * [`splitter`] — routes each packet of a day to exactly one partition
//!   (one per anomaly, plus benign), honoring filter time windows.
//! * [`flowmeter`] — bidirectional flow assembly and the full feature
//!   vector in CICFlowMeter v3 column order.
//! * [`table`] — a small column-typed table with CSV and Parquet backends.
//! * [`dataset`] — label propagation, day aggregation, seeded sampling,
//!   min-max scaling, one-hot encoding, binarization, splits.
//! * [`synth`] — deterministic synthetic traffic/annotation generators used
//!   by tests and benchmarks.

pub mod annotations;
pub mod capture;
pub mod dataset;
pub mod flowmeter;
pub mod labeling;
pub mod splitter;
pub mod synth;
pub mod table;

mod error;

pub use error::{Error, Result};

/// Derive a sub-seed for an isolated purpose from a base seed, so one CLI
/// `--seed` drives sampling, shuffling, etc. without correlation.
pub fn derive_seed(base: u64, purpose: &str) -> u64 {
    use sha2::Digest;
    let mut h = sha2::Sha256::new();
    h.update(base.to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
