//! The labeling mathematics reused from the MAWILab scheme: Simpson
//! overlap between alarm traffic sets and the distance-based decision
//! rule for rejected alarm communities.
//!
//! Community detection itself and the upstream detector ensemble are out
//! of scope; this module exposes the auditable math only.

use std::collections::BTreeSet;
use std::io::Write;

use crate::{Error, Result};

/// The set of flow identifiers matched by one alarm.
#[derive(Clone, Debug)]
pub struct AlarmTrafficSet {
    pub alarm_id: String,
    pub flows: BTreeSet<String>,
}

impl AlarmTrafficSet {
    pub fn new(alarm_id: impl Into<String>, flows: impl IntoIterator<Item = String>) -> Self {
        AlarmTrafficSet {
            alarm_id: alarm_id.into(),
            flows: flows.into_iter().collect(),
        }
    }
}

/// Accept/reject outcome and distance score for one alarm community.
#[derive(Clone, Copy, Debug)]
pub struct CommunityVerdict {
    pub accepted: bool,
    pub distance: f64,
}

/// Four-way outcome of the decision rule. `Unclassified` names the gap the
/// rule leaves for rejected communities with 0 < d_c ≤ 0.5.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Anomalous,
    Suspicious,
    Notice,
    Unclassified,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Anomalous => "anomalous",
            Classification::Suspicious => "suspicious",
            Classification::Notice => "notice",
            Classification::Unclassified => "unclassified",
        }
    }
}

/// Simpson overlap index |a ∩ b| / min(|a|, |b|).
pub fn simpson_index(a: &AlarmTrafficSet, b: &AlarmTrafficSet) -> Result<f64> {
    if a.flows.is_empty() || b.flows.is_empty() {
        let empty = if a.flows.is_empty() { &a.alarm_id } else { &b.alarm_id };
        return Err(Error::Domain(format!(
            "simpson index undefined: alarm {empty:?} has an empty traffic set"
        )));
    }
    let (small, large) = if a.flows.len() <= b.flows.len() {
        (&a.flows, &b.flows)
    } else {
        (&b.flows, &a.flows)
    };
    let shared = small.iter().filter(|f| large.contains(*f)).count();
    Ok(shared as f64 / small.len() as f64)
}

/// Weighted similarity edges between all unordered pairs with positive
/// overlap; indices refer to positions in `sets`, `i < j`, no self-edges.
pub fn build_similarity_edges(sets: &[AlarmTrafficSet]) -> Result<Vec<(usize, usize, f64)>> {
    let mut edges = vec![];
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let w = simpson_index(&sets[i], &sets[j])?;
            if w > 0.0 {
                edges.push((i, j, w));
            }
        }
    }
    Ok(edges)
}

/// Dump an edge list as 3-column text for inspection.
pub fn write_edges(edges: &[(usize, usize, f64)], mut out: impl Write) -> Result<()> {
    for (i, j, w) in edges {
        writeln!(out, "{i}\t{j}\t{w}")?;
    }
    Ok(())
}

/// The decision rule:
///
/// * accepted → anomalous
/// * rejected and d_c ≤ 0 → suspicious
/// * rejected and d_c > 0.5 → notice
/// * rejected and 0 < d_c ≤ 0.5 → the rule names no class; surfaced as
///   `Unclassified`, or folded into suspicious when `fold_unclassified`
///   is set.
pub fn classify_community(v: CommunityVerdict, fold_unclassified: bool) -> Classification {
    if v.accepted {
        Classification::Anomalous
    } else if v.distance <= 0.0 {
        Classification::Suspicious
    } else if v.distance > 0.5 {
        Classification::Notice
    } else if fold_unclassified {
        Classification::Suspicious
    } else {
        Classification::Unclassified
    }
}
