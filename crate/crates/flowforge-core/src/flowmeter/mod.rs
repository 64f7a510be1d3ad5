//! Bidirectional flow assembly and CICFlowMeter-v3-compatible feature
//! computation.
//!
//! A flow is keyed by the orientation-insensitive 5-tuple; the first
//! packet fixes the forward direction (no handshake heuristics — a flow
//! first seen on its SYN/ACK is simply oriented that way). A flow closes
//! when
//!
//! 1. a packet arrives more than `flow_timeout_us` after the flow's first
//!    packet (the packet starts a successor flow),
//! 2. TCP teardown completes — any RST closes immediately; FIN in both
//!    directions puts the flow in a draining state that still absorbs
//!    pure teardown ACKs (zero payload, only ACK/FIN flags) so the final
//!    ACK of the handshake stays in the flow, or
//! 3. the input ends.
//!
//! Closed flows are emitted in closing order; flows alive at end of
//! stream flush in creation order. Inputs must be time-ordered up to the
//! configured reorder slack.

mod flow;
mod schema;
mod stats;

pub use flow::{CloseReason, BULK_GAP_US, BULK_MIN_PACKETS, SUBFLOW_GAP_US};
pub use schema::{emit_schema, feature_index, feature_names, flow_table_schema, SCHEMA};
pub use stats::{running_stats, RunningStats};

use std::collections::HashMap;
use std::net::IpAddr;

use crate::capture::{FiveTuple, PacketRecord};
use crate::table::{Cell, Table};
use crate::{Error, Result};

use flow::FlowAccumulator;

pub const DEFAULT_FLOW_TIMEOUT_US: i64 = 120_000_000;
pub const DEFAULT_ACTIVITY_TIMEOUT_US: i64 = 5_000_000;

/// Label carried by freshly metered flows until propagation.
pub const UNLABELED: &str = "unlabeled";

#[derive(Clone, Copy, Debug)]
pub struct FlowMeterConfig {
    pub flow_timeout_us: i64,
    pub activity_timeout_us: i64,
    /// How far a packet may precede the latest timestamp seen before the
    /// stream is rejected as unordered. 0 = strict.
    pub reorder_slack_us: i64,
}

impl Default for FlowMeterConfig {
    fn default() -> Self {
        FlowMeterConfig {
            flow_timeout_us: DEFAULT_FLOW_TIMEOUT_US,
            activity_timeout_us: DEFAULT_ACTIVITY_TIMEOUT_US,
            reorder_slack_us: 0,
        }
    }
}

/// One finished flow: identification columns, the 76 numeric features in
/// schema order, and the label.
#[derive(Clone, Debug)]
pub struct FlowRecord {
    pub flow_id: String,
    pub src_ip: IpAddr,
    pub src_port: u16,
    pub dst_ip: IpAddr,
    pub dst_port: u16,
    pub protocol: u8,
    /// First-packet timestamp, µs since epoch.
    pub timestamp_us: i64,
    /// Values aligned with [`feature_names`].
    pub features: Vec<f64>,
    pub label: String,
    pub close_reason: CloseReason,
}

impl FlowRecord {
    /// Feature lookup by schema column name.
    pub fn feature(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.features[i])
    }
}

/// Orientation-insensitive flow key: endpoints ordered so both directions
/// hash identically.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct CanonKey {
    a: (IpAddr, u16),
    b: (IpAddr, u16),
    protocol: u8,
}

impl CanonKey {
    fn of(t: FiveTuple) -> Self {
        let src = (t.src_ip, t.src_port);
        let dst = (t.dst_ip, t.dst_port);
        let (a, b) = if src <= dst { (src, dst) } else { (dst, src) };
        CanonKey { a, b, protocol: t.protocol }
    }
}

/// Streaming flow assembler. Feed time-ordered packets with [`push`],
/// collect flows it closes along the way, and drain the rest with
/// [`finish`].
///
/// [`push`]: FlowAssembler::push
/// [`finish`]: FlowAssembler::finish
pub struct FlowAssembler {
    cfg: FlowMeterConfig,
    open: HashMap<CanonKey, FlowAccumulator>,
    next_seq: u64,
    latest_ts: Option<i64>,
    packets_pushed: u64,
    ip_packets: u64,
}

impl FlowAssembler {
    pub fn new(cfg: FlowMeterConfig) -> Self {
        FlowAssembler {
            cfg,
            open: HashMap::new(),
            next_seq: 0,
            latest_ts: None,
            packets_pushed: 0,
            ip_packets: 0,
        }
    }

    /// Number of IP packets accepted so far.
    pub fn ip_packets(&self) -> u64 {
        self.ip_packets
    }

    /// Feed one packet; returns the flows this packet closed (usually
    /// zero or one; a packet can displace a draining flow and then
    /// immediately close its own successor with an RST).
    pub fn push(&mut self, p: &PacketRecord) -> Result<Vec<FlowRecord>> {
        let index = self.packets_pushed;
        self.packets_pushed += 1;
        if let Some(latest) = self.latest_ts {
            if p.ts_us + self.cfg.reorder_slack_us < latest {
                return Err(Error::Validation(format!(
                    "packet {index} out of order: ts {} precedes high-water mark {latest} \
                     beyond the {}µs reorder slack",
                    p.ts_us, self.cfg.reorder_slack_us
                )));
            }
        }
        self.latest_ts = Some(self.latest_ts.map_or(p.ts_us, |l| l.max(p.ts_us)));

        let tuple = match p.five_tuple() {
            Some(t) => t,
            None => return Ok(vec![]), // non-IP frames are excluded here
        };
        self.ip_packets += 1;
        let key = CanonKey::of(tuple);
        let mut closed = vec![];

        if let Some(acc) = self.open.get(&key) {
            let expired = p.ts_us - acc.first_ts() > self.cfg.flow_timeout_us;
            let displaced = acc.is_draining() && !acc.absorbs_while_draining(p);
            if expired || displaced {
                let acc = self.open.remove(&key).expect("present above");
                let reason = if expired { CloseReason::Timeout } else { CloseReason::TcpFin };
                closed.push(acc.finish(UNLABELED, reason));
            }
        }

        let acc = self.open.entry(key).or_insert_with(|| {
            let seq = self.next_seq;
            self.next_seq += 1;
            FlowAccumulator::new(tuple, self.cfg.activity_timeout_us, seq)
        });
        acc.add(p);
        if acc.rst_seen() {
            let acc = self.open.remove(&key).expect("just inserted");
            closed.push(acc.finish(UNLABELED, CloseReason::TcpRst));
        }
        Ok(closed)
    }

    /// Flush all remaining flows in creation order.
    pub fn finish(self) -> Vec<FlowRecord> {
        let mut accs: Vec<FlowAccumulator> = self.open.into_values().collect();
        accs.sort_by_key(|a| a.creation_seq);
        accs.into_iter()
            .map(|a| {
                let reason = if a.is_draining() {
                    CloseReason::TcpFin
                } else {
                    CloseReason::EndOfStream
                };
                a.finish(UNLABELED, reason)
            })
            .collect()
    }
}

/// Assemble a whole packet sequence into flows.
pub fn assemble_flows<'a>(
    packets: impl IntoIterator<Item = &'a PacketRecord>,
    cfg: &FlowMeterConfig,
) -> Result<Vec<FlowRecord>> {
    let mut asm = FlowAssembler::new(*cfg);
    let mut out = vec![];
    for p in packets {
        out.extend(asm.push(p)?);
    }
    out.extend(asm.finish());
    Ok(out)
}

/// Render flow records as a table in the canonical 84-column order.
pub fn flow_records_to_table(records: &[FlowRecord]) -> Result<Table> {
    let schema = flow_table_schema();
    let mut t = Table::empty(&schema);
    for r in records {
        let mut cells = Vec::with_capacity(schema.len());
        cells.push(Cell::Str(r.flow_id.clone()));
        cells.push(Cell::Str(r.src_ip.to_string()));
        cells.push(Cell::I64(i64::from(r.src_port)));
        cells.push(Cell::Str(r.dst_ip.to_string()));
        cells.push(Cell::I64(i64::from(r.dst_port)));
        cells.push(Cell::I64(i64::from(r.protocol)));
        cells.push(Cell::I64(r.timestamp_us));
        cells.extend(r.features.iter().map(|&v| Cell::F64(v)));
        cells.push(Cell::Str(r.label.clone()));
        t.push_row(cells)?;
    }
    Ok(t)
}
