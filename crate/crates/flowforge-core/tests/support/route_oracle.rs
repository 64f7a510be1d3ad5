//! Brute-force packet-routing oracle shared by test targets.
//!
//! Routes each packet by linear scan — every (anomaly, filter) pair,
//! literal field comparison — and picks the winner with the documented
//! precedence, sharing no code with the indexed router.
#![allow(dead_code)]

use chrono::NaiveDate;
use flowforge_core::annotations::DayAnnotations;
use flowforge_core::capture::PacketRecord;
use flowforge_core::splitter::{
    matches, matches_swapped, PacketRouter, PartitionId, SplitOptions,
};
use flowforge_core::synth;

pub fn oracle_route(
    p: &PacketRecord,
    day: &DayAnnotations,
    opts: &SplitOptions,
) -> (PartitionId, u32) {
    if !p.is_ip() {
        return (PartitionId::Benign, 0);
    }
    let mut hits: Vec<(u8, &str)> = vec![];
    for a in &day.anomalies {
        if opts.exclude_notice && a.label == flowforge_core::annotations::Label::Notice {
            continue;
        }
        let hit = a.filters.iter().any(|f| {
            matches(p, f) || (opts.symmetric_filters && matches_swapped(p, f))
        });
        if hit {
            hits.push((a.label.precedence(), &a.anomaly_id));
        }
    }
    let matched = hits.len() as u32;
    match hits.into_iter().min() {
        Some((_, id)) => (PartitionId::Anomaly(id.to_string()), matched),
        None => (PartitionId::Benign, matched),
    }
}

/// Route a synthetic day through both implementations and assert
/// packet-for-packet agreement on partition and match count.
pub fn check_day(seed: u64, n_packets: usize, n_anomalies: usize, opts: &SplitOptions) {
    let date = NaiveDate::from_ymd_opt(2011, 1, 12).unwrap();
    let packets = synth::traffic_day(date, seed, n_packets);
    let day = synth::annotations_day(date, seed, &packets, n_anomalies);
    let router = PacketRouter::new(&day, opts).unwrap();

    let mut any_anomalous = 0u64;
    for (i, p) in packets.iter().enumerate() {
        let got = router.route(p);
        let (want_part, want_matched) = oracle_route(p, &day, opts);
        assert_eq!(got.partition, want_part, "seed {seed} packet {i}");
        assert_eq!(got.matched, want_matched, "seed {seed} packet {i} match count");
        if got.partition != PartitionId::Benign {
            any_anomalous += 1;
        }
    }
    assert!(
        n_anomalies == 0 || any_anomalous > 0,
        "seed {seed}: synthetic anomalies must catch some traffic"
    );
}
