//! Per-flow accumulation and feature computation.
//!
//! Feature semantics (pinned here, verified against a brute-force oracle
//! in the test suite):
//!
//! * packet-length features are over transport payload bytes;
//!   header-length features are over transport header bytes;
//! * statistics are min/max/mean/sample-std (n−1), zero when their sample
//!   count is empty;
//! * rate features divide by the flow duration and are 0 for duration-0
//!   flows (never infinity);
//! * down/up ratio is real division bwd/fwd packets, 0 when no forward
//!   packets — which cannot happen here since the first packet is forward;
//! * subflow count = number of flow-level inter-arrival gaps exceeding
//!   [`SUBFLOW_GAP_US`] plus one; subflow features divide the direction
//!   totals by that count;
//! * a bulk is a run of ≥ [`BULK_MIN_PACKETS`] same-direction payload
//!   packets with gaps ≤ [`BULK_GAP_US`], not interrupted by a bulk
//!   starting in the opposite direction; zero-payload packets neither
//!   extend nor break a run;
//! * active/idle intervals segment the flow timeline at gaps larger than
//!   the activity timeout; zero-length active intervals are not recorded;
//! * initial window bytes are taken from the first packet per direction
//!   that carries a TCP window, 0 if none ever does.

use crate::capture::{FiveTuple, PacketRecord, TcpFlags};

use super::stats::RunningStats;
use super::FlowRecord;

/// Gap above which a new subflow is counted.
pub const SUBFLOW_GAP_US: i64 = 1_000_000;
/// Minimum run length for a bulk transfer.
pub const BULK_MIN_PACKETS: u64 = 4;
/// Maximum intra-bulk gap.
pub const BULK_GAP_US: i64 = 1_000_000;

/// Flag-count order: FIN, SYN, RST, PSH, ACK, URG, CWR, ECE — the same
/// order the schema lists the per-flow flag counters in.
const FLAG_ORDER: [u8; 8] = [
    TcpFlags::FIN,
    TcpFlags::SYN,
    TcpFlags::RST,
    TcpFlags::PSH,
    TcpFlags::ACK,
    TcpFlags::URG,
    TcpFlags::CWR,
    TcpFlags::ECE,
];

#[derive(Default)]
struct BulkState {
    in_run: bool,
    run_start: i64,
    run_last: i64,
    run_count: u64,
    run_bytes: u64,
    /// Start timestamp of the last committed bulk, for cross-direction
    /// interruption checks.
    last_bulk_start: Option<i64>,
    bulks: u64,
    bulk_packets: u64,
    bulk_bytes: u64,
    bulk_duration_us: i64,
}

impl BulkState {
    fn update(&mut self, ts: i64, payload: u64, other_last_bulk_start: Option<i64>) {
        if payload == 0 {
            return;
        }
        let interrupted = other_last_bulk_start.is_some_and(|o| o > self.run_start);
        if !self.in_run || ts - self.run_last > BULK_GAP_US || interrupted {
            self.in_run = true;
            self.run_start = ts;
            self.run_last = ts;
            self.run_count = 1;
            self.run_bytes = payload;
            return;
        }
        self.run_count += 1;
        self.run_bytes += payload;
        match self.run_count.cmp(&BULK_MIN_PACKETS) {
            std::cmp::Ordering::Equal => {
                // The run becomes a bulk: credit everything accumulated.
                self.bulks += 1;
                self.bulk_packets += self.run_count;
                self.bulk_bytes += self.run_bytes;
                self.bulk_duration_us += ts - self.run_start;
                self.last_bulk_start = Some(self.run_start);
            }
            std::cmp::Ordering::Greater => {
                self.bulk_packets += 1;
                self.bulk_bytes += payload;
                self.bulk_duration_us += ts - self.run_last;
            }
            std::cmp::Ordering::Less => {}
        }
        self.run_last = ts;
    }
}

#[derive(Default)]
struct DirStats {
    packets: u64,
    payload_bytes: u64,
    pkt_len: RunningStats,
    header_bytes: u64,
    iat: RunningStats,
    last_ts: Option<i64>,
    psh: u64,
    urg: u64,
    init_window: Option<u16>,
    bulk: BulkState,
}

/// Why a flow was closed; carried for diagnostics and tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloseReason {
    Timeout,
    TcpFin,
    TcpRst,
    EndOfStream,
}

/// Accumulates one bidirectional flow. Forward is the direction of the
/// first packet.
pub struct FlowAccumulator {
    key: FiveTuple,
    first_ts: i64,
    /// Maximum timestamp seen (reorder slack can deliver older packets;
    /// duration stays non-negative).
    last_ts: i64,
    /// Timestamp of the previous packet in arrival order, for IATs.
    prev_ts: i64,
    fwd: DirStats,
    bwd: DirStats,
    /// Payload lengths over both directions.
    pkt_len: RunningStats,
    flow_iat: RunningStats,
    flag_counts: [u64; 8],
    subflow_gaps: u64,
    active: RunningStats,
    idle: RunningStats,
    active_start: i64,
    fwd_act_data_pkts: u64,
    fwd_seg_min: Option<u32>,
    fin_fwd: bool,
    fin_bwd: bool,
    saw_rst: bool,
    /// FIN handshake completed; absorbing trailing teardown ACKs.
    draining: bool,
    activity_timeout_us: i64,
    pub(super) creation_seq: u64,
}

impl FlowAccumulator {
    pub(super) fn new(key: FiveTuple, activity_timeout_us: i64, creation_seq: u64) -> Self {
        FlowAccumulator {
            key,
            first_ts: 0,
            last_ts: 0,
            prev_ts: 0,
            fwd: DirStats::default(),
            bwd: DirStats::default(),
            pkt_len: RunningStats::default(),
            flow_iat: RunningStats::default(),
            flag_counts: [0; 8],
            subflow_gaps: 0,
            active: RunningStats::default(),
            idle: RunningStats::default(),
            active_start: 0,
            fwd_act_data_pkts: 0,
            fwd_seg_min: None,
            fin_fwd: false,
            fin_bwd: false,
            saw_rst: false,
            draining: false,
            activity_timeout_us,
            creation_seq,
        }
    }

    pub(super) fn first_ts(&self) -> i64 {
        self.first_ts
    }

    fn total_packets(&self) -> u64 {
        self.fwd.packets + self.bwd.packets
    }

    /// True when the FIN handshake completed and `p` is a pure teardown
    /// packet (zero payload, only ACK/FIN flags) that should still join.
    pub(super) fn absorbs_while_draining(&self, p: &PacketRecord) -> bool {
        if !self.draining {
            return false;
        }
        let teardown_only = p
            .tcp_flags
            .is_some_and(|f| f.0 & !(TcpFlags::ACK | TcpFlags::FIN) == 0);
        p.payload_len == 0 && teardown_only
    }

    pub(super) fn is_draining(&self) -> bool {
        self.draining
    }

    pub(super) fn add(&mut self, p: &PacketRecord) {
        let ts = p.ts_us;
        let payload = u64::from(p.payload_len);
        let is_fwd = p.five_tuple().expect("assembler feeds IP packets") == self.key;

        if self.total_packets() == 0 {
            self.first_ts = ts;
            self.last_ts = ts;
            self.prev_ts = ts;
            self.active_start = ts;
        } else {
            let gap = ts - self.prev_ts;
            self.flow_iat.push(gap as f64);
            if gap > SUBFLOW_GAP_US {
                self.subflow_gaps += 1;
            }
            if gap > self.activity_timeout_us {
                let active_len = self.prev_ts - self.active_start;
                if active_len > 0 {
                    self.active.push(active_len as f64);
                }
                self.idle.push(gap as f64);
                self.active_start = ts;
            }
            self.prev_ts = ts;
            self.last_ts = self.last_ts.max(ts);
        }

        if let Some(flags) = p.tcp_flags {
            for (slot, mask) in self.flag_counts.iter_mut().zip(FLAG_ORDER) {
                if flags.has(mask) {
                    *slot += 1;
                }
            }
            if flags.has(TcpFlags::FIN) {
                if is_fwd {
                    self.fin_fwd = true;
                } else {
                    self.fin_bwd = true;
                }
            }
            if flags.has(TcpFlags::RST) {
                self.saw_rst = true;
            }
        }

        if is_fwd {
            if payload >= 1 {
                self.fwd_act_data_pkts += 1;
            }
            self.fwd_seg_min = Some(match self.fwd_seg_min {
                None => p.transport_header_len,
                Some(m) => m.min(p.transport_header_len),
            });
            let other_bulk = self.bwd.bulk.last_bulk_start;
            self.fwd.bulk.update(ts, payload, other_bulk);
        } else {
            let other_bulk = self.fwd.bulk.last_bulk_start;
            self.bwd.bulk.update(ts, payload, other_bulk);
        }

        self.pkt_len.push(payload as f64);
        let dir = if is_fwd { &mut self.fwd } else { &mut self.bwd };
        if let Some(flags) = p.tcp_flags {
            if flags.has(TcpFlags::PSH) {
                dir.psh += 1;
            }
            if flags.has(TcpFlags::URG) {
                dir.urg += 1;
            }
        }
        dir.packets += 1;
        dir.payload_bytes += payload;
        dir.pkt_len.push(payload as f64);
        dir.header_bytes += u64::from(p.transport_header_len);
        if let Some(prev) = dir.last_ts {
            dir.iat.push((ts - prev) as f64);
        }
        dir.last_ts = Some(ts);
        if dir.init_window.is_none() {
            dir.init_window = p.tcp_window;
        }

        if self.fin_fwd && self.fin_bwd {
            self.draining = true;
        }
    }

    /// The TCP rule wants this flow closed right now (RST). FIN closure
    /// is signalled via the draining state instead so trailing teardown
    /// ACKs stay in the flow.
    pub(super) fn rst_seen(&self) -> bool {
        self.saw_rst
    }

    /// Consume the accumulator into the final feature vector.
    pub(super) fn finish(self, label: &str, reason: CloseReason) -> FlowRecord {
        let dur_us = (self.last_ts - self.first_ts) as f64;
        let dur_sec = dur_us / 1e6;
        let per_sec = |count: f64| if dur_sec > 0.0 { count / dur_sec } else { 0.0 };

        let total_packets = self.total_packets() as f64;
        let total_payload = (self.fwd.payload_bytes + self.bwd.payload_bytes) as f64;

        let pkt_len = &self.pkt_len;

        // Close the final active interval.
        let mut active = self.active;
        let final_active = self.prev_ts.max(self.last_ts) - self.active_start;
        if final_active > 0 {
            active.push(final_active as f64);
        }

        let subflows = (self.subflow_gaps + 1) as f64;
        let bulk_feats = |b: &BulkState| {
            let n = b.bulks as f64;
            let bytes_avg = if b.bulks > 0 { b.bulk_bytes as f64 / n } else { 0.0 };
            let pkts_avg = if b.bulks > 0 { b.bulk_packets as f64 / n } else { 0.0 };
            let dur_sec = b.bulk_duration_us as f64 / 1e6;
            let rate = if dur_sec > 0.0 { b.bulk_bytes as f64 / dur_sec } else { 0.0 };
            (bytes_avg, pkts_avg, rate)
        };
        let (fwd_bb, fwd_pb, fwd_br) = bulk_feats(&self.fwd.bulk);
        let (bwd_bb, bwd_pb, bwd_br) = bulk_feats(&self.bwd.bulk);

        let fwd_packets = self.fwd.packets as f64;
        let bwd_packets = self.bwd.packets as f64;
        let down_up = if self.fwd.packets > 0 { bwd_packets / fwd_packets } else { 0.0 };
        let seg_avg = |d: &DirStats| {
            if d.packets > 0 { d.payload_bytes as f64 / d.packets as f64 } else { 0.0 }
        };

        let features = vec![
            dur_us,                                      // Flow Duration
            fwd_packets,                                 // Tot Fwd Pkts
            bwd_packets,                                 // Tot Bwd Pkts
            self.fwd.payload_bytes as f64,               // TotLen Fwd Pkts
            self.bwd.payload_bytes as f64,               // TotLen Bwd Pkts
            self.fwd.pkt_len.max(),                      // Fwd Pkt Len Max
            self.fwd.pkt_len.min(),                      // Fwd Pkt Len Min
            self.fwd.pkt_len.mean(),                     // Fwd Pkt Len Mean
            self.fwd.pkt_len.std(),                      // Fwd Pkt Len Std
            self.bwd.pkt_len.max(),                      // Bwd Pkt Len Max
            self.bwd.pkt_len.min(),                      // Bwd Pkt Len Min
            self.bwd.pkt_len.mean(),                     // Bwd Pkt Len Mean
            self.bwd.pkt_len.std(),                      // Bwd Pkt Len Std
            per_sec(total_payload),                      // Flow Byts/s
            per_sec(total_packets),                      // Flow Pkts/s
            self.flow_iat.mean(),                        // Flow IAT Mean
            self.flow_iat.std(),                         // Flow IAT Std
            self.flow_iat.max(),                         // Flow IAT Max
            self.flow_iat.min(),                         // Flow IAT Min
            self.fwd.iat.sum(),                          // Fwd IAT Tot
            self.fwd.iat.mean(),                         // Fwd IAT Mean
            self.fwd.iat.std(),                          // Fwd IAT Std
            self.fwd.iat.max(),                          // Fwd IAT Max
            self.fwd.iat.min(),                          // Fwd IAT Min
            self.bwd.iat.sum(),                          // Bwd IAT Tot
            self.bwd.iat.mean(),                         // Bwd IAT Mean
            self.bwd.iat.std(),                          // Bwd IAT Std
            self.bwd.iat.max(),                          // Bwd IAT Max
            self.bwd.iat.min(),                          // Bwd IAT Min
            self.fwd.psh as f64,                         // Fwd PSH Flags
            self.bwd.psh as f64,                         // Bwd PSH Flags
            self.fwd.urg as f64,                         // Fwd URG Flags
            self.bwd.urg as f64,                         // Bwd URG Flags
            self.fwd.header_bytes as f64,                // Fwd Header Len
            self.bwd.header_bytes as f64,                // Bwd Header Len
            per_sec(fwd_packets),                        // Fwd Pkts/s
            per_sec(bwd_packets),                        // Bwd Pkts/s
            pkt_len.min(),                               // Pkt Len Min
            pkt_len.max(),                               // Pkt Len Max
            pkt_len.mean(),                              // Pkt Len Mean
            pkt_len.std(),                               // Pkt Len Std
            pkt_len.variance(),                          // Pkt Len Var
            self.flag_counts[0] as f64,                  // FIN Flag Cnt
            self.flag_counts[1] as f64,                  // SYN Flag Cnt
            self.flag_counts[2] as f64,                  // RST Flag Cnt
            self.flag_counts[3] as f64,                  // PSH Flag Cnt
            self.flag_counts[4] as f64,                  // ACK Flag Cnt
            self.flag_counts[5] as f64,                  // URG Flag Cnt
            self.flag_counts[6] as f64,                  // CWE Flag Count
            self.flag_counts[7] as f64,                  // ECE Flag Cnt
            down_up,                                     // Down/Up Ratio
            total_payload / total_packets,               // Pkt Size Avg
            seg_avg(&self.fwd),                          // Fwd Seg Size Avg
            seg_avg(&self.bwd),                          // Bwd Seg Size Avg
            fwd_bb,                                      // Fwd Byts/b Avg
            fwd_pb,                                      // Fwd Pkts/b Avg
            fwd_br,                                      // Fwd Blk Rate Avg
            bwd_bb,                                      // Bwd Byts/b Avg
            bwd_pb,                                      // Bwd Pkts/b Avg
            bwd_br,                                      // Bwd Blk Rate Avg
            fwd_packets / subflows,                      // Subflow Fwd Pkts
            self.fwd.payload_bytes as f64 / subflows,    // Subflow Fwd Byts
            bwd_packets / subflows,                      // Subflow Bwd Pkts
            self.bwd.payload_bytes as f64 / subflows,    // Subflow Bwd Byts
            f64::from(self.fwd.init_window.unwrap_or(0)), // Init Fwd Win Byts
            f64::from(self.bwd.init_window.unwrap_or(0)), // Init Bwd Win Byts
            self.fwd_act_data_pkts as f64,               // Fwd Act Data Pkts
            f64::from(self.fwd_seg_min.unwrap_or(0)),    // Fwd Seg Size Min
            active.mean(),                               // Active Mean
            active.std(),                                // Active Std
            active.max(),                                // Active Max
            active.min(),                                // Active Min
            self.idle.mean(),                            // Idle Mean
            self.idle.std(),                             // Idle Std
            self.idle.max(),                             // Idle Max
            self.idle.min(),                             // Idle Min
        ];
        debug_assert_eq!(features.len(), super::schema::feature_names().len());

        FlowRecord {
            flow_id: format!(
                "{}-{}-{}-{}-{}",
                self.key.src_ip, self.key.dst_ip, self.key.src_port, self.key.dst_port,
                self.key.protocol
            ),
            src_ip: self.key.src_ip,
            src_port: self.key.src_port,
            dst_ip: self.key.dst_ip,
            dst_port: self.key.dst_port,
            protocol: self.key.protocol,
            timestamp_us: self.first_ts,
            features,
            label: label.to_string(),
            close_reason: reason,
        }
    }
}
