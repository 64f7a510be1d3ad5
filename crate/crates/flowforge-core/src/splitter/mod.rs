//! Packet routing: every packet of a day's capture lands in exactly one
//! partition — one per anomaly plus the benign complement.
//!
//! Routing is exclusive. A packet matching several anomalies goes to the
//! one with the strongest label (anomalous > suspicious > notice), ties
//! broken by lexicographically smallest anomaly id; such multi-match
//! incidents are counted in the [`SplitReport`] so the policy's impact
//! stays measurable. Non-IP frames carry no matchable fields and are
//! always benign.
//!
//! Filter direction is literal — src fields match the packet source —
//! unless [`SplitOptions::symmetric_filters`] also tries the swapped
//! orientation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotations::{AnomalyFilter, DayAnnotations, Label, TimeWindow};
use crate::capture::{CaptureReader, CaptureWriter, PacketRecord};
use crate::table::{Cell, DType, Table};
use crate::{Error, Result};

/// Destination of one routed packet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartitionId {
    Anomaly(String),
    Benign,
}

impl PartitionId {
    /// Stem of the partition's capture file.
    pub fn file_stem(&self) -> &str {
        match self {
            PartitionId::Anomaly(id) => id,
            PartitionId::Benign => "benign",
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SplitOptions {
    /// Also try filters against the swapped packet orientation.
    pub symmetric_filters: bool,
    /// Drop notice-labeled anomalies from routing entirely; their traffic
    /// falls through to benign.
    pub exclude_notice: bool,
}

/// Literal filter match: every present field equals the packet's field
/// and the window, if any, contains the packet timestamp. Total — non-IP
/// packets simply fail any field comparison.
pub fn matches(p: &PacketRecord, f: &AnomalyFilter) -> bool {
    f.src_ip.is_none_or(|v| p.src_ip == Some(v))
        && f.dst_ip.is_none_or(|v| p.dst_ip == Some(v))
        && f.src_port.is_none_or(|v| p.is_ip() && p.src_port == v)
        && f.dst_port.is_none_or(|v| p.is_ip() && p.dst_port == v)
        && f.protocol.is_none_or(|v| p.protocol == Some(v))
        && f.window.is_none_or(|w| w.contains(p.ts_us))
}

/// [`matches`] with the packet's endpoints swapped.
pub fn matches_swapped(p: &PacketRecord, f: &AnomalyFilter) -> bool {
    f.src_ip.is_none_or(|v| p.dst_ip == Some(v))
        && f.dst_ip.is_none_or(|v| p.src_ip == Some(v))
        && f.src_port.is_none_or(|v| p.is_ip() && p.dst_port == v)
        && f.dst_port.is_none_or(|v| p.is_ip() && p.src_port == v)
        && f.protocol.is_none_or(|v| p.protocol == Some(v))
        && f.window.is_none_or(|w| w.contains(p.ts_us))
}

/// Field-presence projection of a filter or packet: absent positions stay
/// `None` on both sides so bucket keys compare by the present fields only.
type Projection = (Option<IpAddr>, Option<IpAddr>, Option<u16>, Option<u16>, Option<u8>);

const SRC_IP: u8 = 1;
const DST_IP: u8 = 2;
const SRC_PORT: u8 = 4;
const DST_PORT: u8 = 8;
const PROTOCOL: u8 = 16;

fn filter_mask(f: &AnomalyFilter) -> u8 {
    u8::from(f.src_ip.is_some()) * SRC_IP
        + u8::from(f.dst_ip.is_some()) * DST_IP
        + u8::from(f.src_port.is_some()) * SRC_PORT
        + u8::from(f.dst_port.is_some()) * DST_PORT
        + u8::from(f.protocol.is_some()) * PROTOCOL
}

fn project_filter(f: &AnomalyFilter) -> Projection {
    (f.src_ip, f.dst_ip, f.src_port, f.dst_port, f.protocol)
}

fn project_packet(p: &PacketRecord, mask: u8, swapped: bool) -> Projection {
    let (src_ip, dst_ip, src_port, dst_port) = if swapped {
        (p.dst_ip, p.src_ip, p.dst_port, p.src_port)
    } else {
        (p.src_ip, p.dst_ip, p.src_port, p.dst_port)
    };
    (
        (mask & SRC_IP != 0).then_some(src_ip).flatten(),
        (mask & DST_IP != 0).then_some(dst_ip).flatten(),
        (mask & SRC_PORT != 0).then_some(src_port),
        (mask & DST_PORT != 0).then_some(dst_port),
        (mask & PROTOCOL != 0).then(|| p.protocol).flatten(),
    )
}

struct Candidate {
    anomaly: usize,
    window: Option<TimeWindow>,
}

/// Precomputed routing index over a day's anomalies. Filters are grouped
/// by which fields they constrain (≤ 32 groups) and hashed on those
/// fields, so routing a packet costs at most one hash lookup per distinct
/// field combination instead of a scan over all filters.
pub struct PacketRouter {
    buckets: HashMap<u8, HashMap<Projection, Vec<Candidate>>>,
    /// anomaly index → (id, label), in day order.
    anomalies: Vec<(String, Label)>,
    symmetric: bool,
}

/// Routing decision for one packet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteOutcome {
    pub partition: PartitionId,
    /// Distinct anomalies the packet matched before precedence.
    pub matched: u32,
}

impl PacketRouter {
    pub fn new(day: &DayAnnotations, opts: &SplitOptions) -> Result<Self> {
        let mut router = PacketRouter {
            buckets: HashMap::new(),
            anomalies: vec![],
            symmetric: opts.symmetric_filters,
        };
        for a in &day.anomalies {
            if opts.exclude_notice && a.label == Label::Notice {
                continue;
            }
            validate_partition_name(&a.anomaly_id)?;
            a.validate()?;
            let idx = router.anomalies.len();
            router.anomalies.push((a.anomaly_id.clone(), a.label));
            for f in &a.filters {
                router
                    .buckets
                    .entry(filter_mask(f))
                    .or_default()
                    .entry(project_filter(f))
                    .or_default()
                    .push(Candidate { anomaly: idx, window: f.window });
            }
        }
        Ok(router)
    }

    pub fn route(&self, p: &PacketRecord) -> RouteOutcome {
        if !p.is_ip() {
            return RouteOutcome { partition: PartitionId::Benign, matched: 0 };
        }
        let mut hits: BTreeSet<usize> = BTreeSet::new();
        for (&mask, bucket) in &self.buckets {
            let mut probe = |swapped: bool| {
                if let Some(cands) = bucket.get(&project_packet(p, mask, swapped)) {
                    for c in cands {
                        if c.window.is_none_or(|w| w.contains(p.ts_us)) {
                            hits.insert(c.anomaly);
                        }
                    }
                }
            };
            probe(false);
            if self.symmetric {
                probe(true);
            }
        }
        let best = hits
            .iter()
            .min_by_key(|&&i| (self.anomalies[i].1.precedence(), &self.anomalies[i].0));
        RouteOutcome {
            partition: match best {
                Some(&i) => PartitionId::Anomaly(self.anomalies[i].0.clone()),
                None => PartitionId::Benign,
            },
            matched: hits.len() as u32,
        }
    }
}

fn validate_partition_name(id: &str) -> Result<()> {
    let bad = id.is_empty()
        || id == "benign"
        || id == ".."
        || id.starts_with('.')
        || id.contains(['/', '\\', '\0']);
    if bad {
        return Err(Error::Validation(format!(
            "anomaly id {id:?} cannot name a partition file"
        )));
    }
    Ok(())
}

/// Counters for one split run. Partition counts are keyed by file stem
/// ("benign" plus anomaly ids) and sum to the total.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitReport {
    pub total_packets: u64,
    pub partitions: BTreeMap<String, u64>,
    /// Packets that matched more than one anomaly before precedence.
    pub multi_match_packets: u64,
}

impl SplitReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Contract(format!("report serialization: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| {
            Error::Parse(format!("{}: {e}", path.as_ref().display()))
        })
    }
}

/// Everything a split produces: the report, where each partition file
/// landed, and the per-packet metadata byproduct.
pub struct SplitOutcome {
    pub report: SplitReport,
    /// file stem → final capture path (non-empty partitions only).
    pub files: BTreeMap<String, PathBuf>,
    pub metadata: Table,
}

pub fn packet_metadata_schema() -> Vec<(&'static str, DType)> {
    vec![
        ("packet_index", DType::Int64),
        ("ts_us", DType::Int64),
        ("src_ip", DType::Utf8),
        ("src_port", DType::Int64),
        ("dst_ip", DType::Utf8),
        ("dst_port", DType::Int64),
        ("protocol", DType::Int64),
        ("ip_header_len", DType::Int64),
        ("transport_header_len", DType::Int64),
        ("payload_len", DType::Int64),
        ("wire_len", DType::Int64),
        ("tcp_flags", DType::Int64),
        ("tcp_window", DType::Int64),
        ("partition", DType::Utf8),
    ]
}

fn metadata_row(index: u64, p: &PacketRecord, partition: &PartitionId) -> Vec<Cell> {
    let opt_i64 = |v: Option<i64>| v.map_or(Cell::Null, Cell::I64);
    let ip = p.is_ip();
    vec![
        Cell::I64(index as i64),
        Cell::I64(p.ts_us),
        p.src_ip.map_or(Cell::Null, |v| Cell::Str(v.to_string())),
        opt_i64(ip.then_some(i64::from(p.src_port))),
        p.dst_ip.map_or(Cell::Null, |v| Cell::Str(v.to_string())),
        opt_i64(ip.then_some(i64::from(p.dst_port))),
        opt_i64(p.protocol.map(i64::from)),
        Cell::I64(i64::from(p.ip_header_len)),
        Cell::I64(i64::from(p.transport_header_len)),
        Cell::I64(i64::from(p.payload_len)),
        Cell::I64(i64::from(p.wire_len)),
        opt_i64(p.tcp_flags.map(|f| i64::from(f.0))),
        opt_i64(p.tcp_window.map(i64::from)),
        Cell::Str(partition.file_stem().to_string()),
    ]
}

/// Split one capture into per-partition captures under `out_dir`,
/// preserving relative packet order. Outputs are written to temporaries
/// and renamed only on success; a failure leaves no partial files.
pub fn split_capture(
    capture: impl AsRef<Path>,
    day: &DayAnnotations,
    out_dir: impl AsRef<Path>,
    opts: &SplitOptions,
) -> Result<SplitOutcome> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let router = PacketRouter::new(day, opts)?;

    let mut writers: BTreeMap<String, (PathBuf, CaptureWriter)> = BTreeMap::new();
    let run = (|| -> Result<SplitOutcome> {
        let mut reader = CaptureReader::open(capture.as_ref())?;
        let linktype = reader.linktype();
        let mut report = SplitReport::default();
        let mut metadata = Table::empty(&packet_metadata_schema());
        for (index, packet) in (&mut reader).enumerate() {
            let packet = packet?;
            let outcome = router.route(&packet);
            let stem = outcome.partition.file_stem();
            report.total_packets += 1;
            *report.partitions.entry(stem.to_string()).or_insert(0) += 1;
            if outcome.matched > 1 {
                report.multi_match_packets += 1;
            }
            if !writers.contains_key(stem) {
                let tmp = out_dir.join(format!(".tmp.{stem}.pcap"));
                let w = CaptureWriter::create(&tmp, linktype)?;
                writers.insert(stem.to_string(), (tmp, w));
            }
            writers
                .get_mut(stem)
                .expect("inserted above")
                .1
                .write(&packet)?;
            metadata.push_row(metadata_row(index as u64, &packet, &outcome.partition))?;
        }

        let mut files = BTreeMap::new();
        for (stem, (tmp, w)) in std::mem::take(&mut writers) {
            w.finish()?;
            let final_path = out_dir.join(format!("{stem}.pcap"));
            std::fs::rename(&tmp, &final_path)?;
            files.insert(stem, final_path);
        }
        debug_assert_eq!(
            report.partitions.values().sum::<u64>(),
            report.total_packets
        );
        Ok(SplitOutcome { report, files, metadata })
    })();

    if run.is_err() {
        for (tmp, _) in writers.values() {
            let _ = std::fs::remove_file(tmp);
        }
    }
    run
}
