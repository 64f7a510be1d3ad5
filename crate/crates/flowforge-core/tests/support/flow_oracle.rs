//! Brute-force flow-feature oracle shared by test targets.
//!
//! Everything here recomputes what the streaming assembler produces, in
//! a deliberately naive way — linear scans over owned packet lists,
//! two-pass statistics, per-run bulk accounting — so the two
//! implementations share no code paths.
#![allow(dead_code)]

use std::net::IpAddr;

use flowforge_core::capture::{PacketRecord, TcpFlags};
use flowforge_core::flowmeter::{
    assemble_flows, feature_names, CloseReason, FlowMeterConfig, FlowRecord,
};
use flowforge_core::synth;

pub const FLOW_TIMEOUT_US: i64 = 120_000_000;
pub const ACTIVITY_TIMEOUT_US: i64 = 5_000_000;
pub const SUBFLOW_GAP_US: i64 = 1_000_000;
pub const BULK_GAP_US: i64 = 1_000_000;

pub struct OFlow {
    pub packets: Vec<PacketRecord>,
    pub reason: &'static str,
}

pub fn tuple_of(p: &PacketRecord) -> (IpAddr, u16, IpAddr, u16, u8) {
    let t = p.five_tuple().expect("IP packet");
    (t.src_ip, t.src_port, t.dst_ip, t.dst_port, t.protocol)
}

fn same_conversation(a: &PacketRecord, b: &PacketRecord) -> bool {
    let (asi, asp, adi, adp, apr) = tuple_of(a);
    let (bsi, bsp, bdi, bdp, bpr) = tuple_of(b);
    apr == bpr
        && ((asi, asp, adi, adp) == (bsi, bsp, bdi, bdp)
            || (asi, asp, adi, adp) == (bdi, bdp, bsi, bsp))
}

fn is_forward(flow_first: &PacketRecord, p: &PacketRecord) -> bool {
    tuple_of(flow_first) == tuple_of(p)
}

fn pure_teardown(p: &PacketRecord) -> bool {
    p.payload_len == 0
        && p.tcp_flags
            .is_some_and(|f| f.0 & !(TcpFlags::ACK | TcpFlags::FIN) == 0)
}

struct OpenFlow {
    packets: Vec<PacketRecord>,
    fin_fwd: bool,
    fin_bwd: bool,
}

impl OpenFlow {
    fn draining(&self) -> bool {
        self.fin_fwd && self.fin_bwd
    }
}

pub fn oracle_assemble(packets: &[PacketRecord]) -> Vec<OFlow> {
    let mut open: Vec<OpenFlow> = vec![];
    let mut done: Vec<OFlow> = vec![];
    for p in packets.iter().filter(|p| p.is_ip()) {
        let found = open
            .iter()
            .position(|f| same_conversation(&f.packets[0], p));
        let idx = match found {
            Some(i) => {
                let expired = p.ts_us - open[i].packets[0].ts_us > FLOW_TIMEOUT_US;
                if expired || (open[i].draining() && !pure_teardown(p)) {
                    let old = open.remove(i);
                    done.push(OFlow {
                        packets: old.packets,
                        reason: if expired { "timeout" } else { "fin" },
                    });
                    open.push(OpenFlow { packets: vec![], fin_fwd: false, fin_bwd: false });
                    open.len() - 1
                } else {
                    i
                }
            }
            None => {
                open.push(OpenFlow { packets: vec![], fin_fwd: false, fin_bwd: false });
                open.len() - 1
            }
        };
        let flow = &mut open[idx];
        let fwd = flow.packets.is_empty() || is_forward(&flow.packets[0], p);
        flow.packets.push(p.clone());
        if p.tcp_flags.is_some_and(|f| f.has(TcpFlags::FIN)) {
            if fwd {
                flow.fin_fwd = true;
            } else {
                flow.fin_bwd = true;
            }
        }
        if p.tcp_flags.is_some_and(|f| f.has(TcpFlags::RST)) {
            let f = open.remove(idx);
            done.push(OFlow { packets: f.packets, reason: "rst" });
        }
    }
    for f in open {
        let reason = if f.draining() { "fin" } else { "eos" };
        done.push(OFlow { packets: f.packets, reason });
    }
    done
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 }
}

fn sample_var(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    sample_var(xs).sqrt()
}

fn fmin(xs: &[f64]) -> f64 {
    if xs.is_empty() { 0.0 } else { xs.iter().copied().fold(f64::INFINITY, f64::min) }
}

fn fmax(xs: &[f64]) -> f64 {
    if xs.is_empty() { 0.0 } else { xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) }
}

fn diffs(ts: &[i64]) -> Vec<f64> {
    ts.windows(2).map(|w| (w[1] - w[0]) as f64).collect()
}

/// Per-direction bulk totals: (bulks, packets, bytes, duration_µs).
fn oracle_bulks(flow: &[PacketRecord]) -> [(u64, u64, u64, i64); 2] {
    // Runs of payload packets per direction; a run breaks on a gap over
    // BULK_GAP_US or when the other direction committed a bulk after the
    // run started. Commitment happens at the run's 4th packet.
    let mut runs: [Vec<Vec<(i64, u64)>>; 2] = [vec![], vec![]];
    let mut committed: [Option<i64>; 2] = [None, None];
    for p in flow {
        if p.payload_len == 0 {
            continue;
        }
        let d = usize::from(!is_forward(&flow[0], p));
        let start_new = match runs[d].last() {
            None => true,
            Some(run) => {
                let last = *run.last().expect("runs are never empty");
                let interrupted = committed[1 - d].is_some_and(|o| o > run[0].0);
                p.ts_us - last.0 > BULK_GAP_US || interrupted
            }
        };
        if start_new {
            runs[d].push(vec![]);
        }
        let run = runs[d].last_mut().expect("pushed above");
        run.push((p.ts_us, u64::from(p.payload_len)));
        if run.len() == 4 {
            committed[d] = Some(run[0].0);
        }
    }
    let totals = |runs: &[Vec<(i64, u64)>]| {
        let mut t = (0u64, 0u64, 0u64, 0i64);
        for run in runs.iter().filter(|r| r.len() >= 4) {
            t.0 += 1;
            t.1 += run.len() as u64;
            t.2 += run.iter().map(|&(_, b)| b).sum::<u64>();
            t.3 += run.last().expect("non-empty").0 - run[0].0;
        }
        t
    };
    [totals(&runs[0]), totals(&runs[1])]
}

/// The 76 features recomputed with direct formulas, in schema order.
pub fn oracle_features(flow: &[PacketRecord]) -> Vec<f64> {
    let first = &flow[0];
    let fwd: Vec<&PacketRecord> = flow.iter().filter(|p| is_forward(first, p)).collect();
    let bwd: Vec<&PacketRecord> = flow.iter().filter(|p| !is_forward(first, p)).collect();

    let all_ts: Vec<i64> = flow.iter().map(|p| p.ts_us).collect();
    let fwd_ts: Vec<i64> = fwd.iter().map(|p| p.ts_us).collect();
    let bwd_ts: Vec<i64> = bwd.iter().map(|p| p.ts_us).collect();
    let len_of = |ps: &[&PacketRecord]| -> Vec<f64> {
        ps.iter().map(|p| f64::from(p.payload_len)).collect()
    };
    let fwd_len = len_of(&fwd);
    let bwd_len = len_of(&bwd);
    let all_len: Vec<f64> = flow.iter().map(|p| f64::from(p.payload_len)).collect();

    let duration = (all_ts.iter().max().unwrap() - all_ts[0]) as f64;
    let dur_sec = duration / 1e6;
    let rate = |x: f64| if dur_sec > 0.0 { x / dur_sec } else { 0.0 };

    let flow_iat = diffs(&all_ts);
    let fwd_iat = diffs(&fwd_ts);
    let bwd_iat = diffs(&bwd_ts);

    let count_flag = |ps: &[&PacketRecord], mask: u8| -> f64 {
        ps.iter()
            .filter(|p| p.tcp_flags.is_some_and(|f| f.has(mask)))
            .count() as f64
    };
    let all: Vec<&PacketRecord> = flow.iter().collect();
    let header_sum = |ps: &[&PacketRecord]| -> f64 {
        ps.iter().map(|p| f64::from(p.transport_header_len)).sum()
    };
    let init_win = |ps: &[&PacketRecord]| -> f64 {
        ps.iter().find_map(|p| p.tcp_window).map_or(0.0, f64::from)
    };

    let total_payload: f64 = all_len.iter().sum();
    let fwd_payload: f64 = fwd_len.iter().sum();
    let bwd_payload: f64 = bwd_len.iter().sum();

    // subflows: flow-level inter-arrival gaps above the threshold
    let subflows = (flow_iat.iter().filter(|&&g| g > SUBFLOW_GAP_US as f64).count() + 1) as f64;

    // active/idle segmentation
    let mut active = vec![];
    let mut idle = vec![];
    let mut seg_start = all_ts[0];
    let mut seg_last = all_ts[0];
    for &ts in &all_ts[1..] {
        if ts - seg_last > ACTIVITY_TIMEOUT_US {
            if seg_last > seg_start {
                active.push((seg_last - seg_start) as f64);
            }
            idle.push((ts - seg_last) as f64);
            seg_start = ts;
        }
        seg_last = seg_last.max(ts);
    }
    if seg_last > seg_start {
        active.push((seg_last - seg_start) as f64);
    }

    let [fb, bb] = oracle_bulks(flow);
    let bulk_avg = |t: (u64, u64, u64, i64)| -> (f64, f64, f64) {
        if t.0 == 0 {
            return (0.0, 0.0, 0.0);
        }
        let r = if t.3 > 0 { t.2 as f64 / (t.3 as f64 / 1e6) } else { 0.0 };
        (t.2 as f64 / t.0 as f64, t.1 as f64 / t.0 as f64, r)
    };
    let (fwd_bb, fwd_pb, fwd_br) = bulk_avg(fb);
    let (bwd_bb, bwd_pb, bwd_br) = bulk_avg(bb);

    vec![
        duration,
        fwd.len() as f64,
        bwd.len() as f64,
        fwd_payload,
        bwd_payload,
        fmax(&fwd_len),
        fmin(&fwd_len),
        mean(&fwd_len),
        sample_std(&fwd_len),
        fmax(&bwd_len),
        fmin(&bwd_len),
        mean(&bwd_len),
        sample_std(&bwd_len),
        rate(total_payload),
        rate(flow.len() as f64),
        mean(&flow_iat),
        sample_std(&flow_iat),
        fmax(&flow_iat),
        fmin(&flow_iat),
        fwd_iat.iter().sum(),
        mean(&fwd_iat),
        sample_std(&fwd_iat),
        fmax(&fwd_iat),
        fmin(&fwd_iat),
        bwd_iat.iter().sum(),
        mean(&bwd_iat),
        sample_std(&bwd_iat),
        fmax(&bwd_iat),
        fmin(&bwd_iat),
        count_flag(&fwd, TcpFlags::PSH),
        count_flag(&bwd, TcpFlags::PSH),
        count_flag(&fwd, TcpFlags::URG),
        count_flag(&bwd, TcpFlags::URG),
        header_sum(&fwd),
        header_sum(&bwd),
        rate(fwd.len() as f64),
        rate(bwd.len() as f64),
        fmin(&all_len),
        fmax(&all_len),
        mean(&all_len),
        sample_std(&all_len),
        sample_var(&all_len),
        count_flag(&all, TcpFlags::FIN),
        count_flag(&all, TcpFlags::SYN),
        count_flag(&all, TcpFlags::RST),
        count_flag(&all, TcpFlags::PSH),
        count_flag(&all, TcpFlags::ACK),
        count_flag(&all, TcpFlags::URG),
        count_flag(&all, TcpFlags::CWR),
        count_flag(&all, TcpFlags::ECE),
        bwd.len() as f64 / fwd.len() as f64,
        total_payload / flow.len() as f64,
        if fwd.is_empty() { 0.0 } else { fwd_payload / fwd.len() as f64 },
        if bwd.is_empty() { 0.0 } else { bwd_payload / bwd.len() as f64 },
        fwd_bb,
        fwd_pb,
        fwd_br,
        bwd_bb,
        bwd_pb,
        bwd_br,
        fwd.len() as f64 / subflows,
        fwd_payload / subflows,
        bwd.len() as f64 / subflows,
        bwd_payload / subflows,
        init_win(&fwd),
        init_win(&bwd),
        fwd.iter().filter(|p| p.payload_len >= 1).count() as f64,
        if fwd.is_empty() {
            0.0
        } else {
            fwd.iter().map(|p| f64::from(p.transport_header_len)).fold(f64::INFINITY, f64::min)
        },
        mean(&active),
        sample_std(&active),
        fmax(&active),
        fmin(&active),
        mean(&idle),
        sample_std(&idle),
        fmax(&idle),
        fmin(&idle),
    ]
}

/// Features compared bit-for-bit: everything that is a count, a sum of
/// integers, an extremum, or a duration. The rest (means, stds, rates,
/// ratios) allow 1e-6 relative error between the two computations.
pub const EXACT: [&str; 36] = [
    "Flow Duration",
    "Tot Fwd Pkts",
    "Tot Bwd Pkts",
    "TotLen Fwd Pkts",
    "TotLen Bwd Pkts",
    "Fwd Pkt Len Max",
    "Fwd Pkt Len Min",
    "Bwd Pkt Len Max",
    "Bwd Pkt Len Min",
    "Flow IAT Max",
    "Flow IAT Min",
    "Fwd IAT Tot",
    "Fwd IAT Max",
    "Fwd IAT Min",
    "Bwd IAT Tot",
    "Bwd IAT Max",
    "Bwd IAT Min",
    "Fwd PSH Flags",
    "Bwd PSH Flags",
    "Fwd URG Flags",
    "Bwd URG Flags",
    "Fwd Header Len",
    "Bwd Header Len",
    "Pkt Len Min",
    "Pkt Len Max",
    "FIN Flag Cnt",
    "SYN Flag Cnt",
    "RST Flag Cnt",
    "PSH Flag Cnt",
    "ACK Flag Cnt",
    "URG Flag Cnt",
    "CWE Flag Count",
    "ECE Flag Cnt",
    "Init Fwd Win Byts",
    "Init Bwd Win Byts",
    "Fwd Act Data Pkts",
];

pub fn close_enough(name: &str, got: f64, want: f64) -> bool {
    if EXACT.contains(&name) {
        return got == want;
    }
    let scale = got.abs().max(want.abs());
    (got - want).abs() <= 1e-9 + 1e-6 * scale
}

pub fn reason_str(r: CloseReason) -> &'static str {
    match r {
        CloseReason::Timeout => "timeout",
        CloseReason::TcpFin => "fin",
        CloseReason::TcpRst => "rst",
        CloseReason::EndOfStream => "eos",
    }
}

/// Assemble with the engine and with the oracle, assert full agreement
/// (flow identity, close reasons, all 76 features) plus packet/byte
/// conservation against the raw stream, and return the engine's flows.
pub fn check(case: &str, packets: &[PacketRecord]) -> Vec<FlowRecord> {
    let cfg = FlowMeterConfig {
        flow_timeout_us: FLOW_TIMEOUT_US,
        activity_timeout_us: ACTIVITY_TIMEOUT_US,
        reorder_slack_us: 0,
    };
    let engine = assemble_flows(packets, &cfg).unwrap_or_else(|e| panic!("{case}: {e}"));
    let oracle = oracle_assemble(packets);
    assert_eq!(engine.len(), oracle.len(), "{case}: flow count");
    for (i, (got, want)) in engine.iter().zip(&oracle).enumerate() {
        let want_tuple = tuple_of(&want.packets[0]);
        assert_eq!(
            (got.src_ip, got.src_port, got.dst_ip, got.dst_port, got.protocol),
            want_tuple,
            "{case}: flow {i} identity"
        );
        assert_eq!(got.timestamp_us, want.packets[0].ts_us, "{case}: flow {i} timestamp");
        assert_eq!(reason_str(got.close_reason), want.reason, "{case}: flow {i} close reason");
        let want_feats = oracle_features(&want.packets);
        assert_eq!(want_feats.len(), feature_names().len(), "oracle feature count");
        for (name, (g, w)) in feature_names().iter().zip(got.features.iter().zip(&want_feats)) {
            assert!(
                close_enough(name, *g, *w),
                "{case}: flow {i} feature {name:?}: engine {g} vs oracle {w}"
            );
        }
    }
    assert_conservation(case, packets, &engine);
    engine
}

/// Σ flow packet counts must equal the stream's IP packet count, and
/// Σ flow payload bytes its payload byte total; both exactly.
pub fn assert_conservation(case: &str, packets: &[PacketRecord], flows: &[FlowRecord]) {
    let ip: Vec<&PacketRecord> = packets.iter().filter(|p| p.is_ip()).collect();
    let total_pkts: f64 = flows
        .iter()
        .map(|f| f.feature("Tot Fwd Pkts").unwrap() + f.feature("Tot Bwd Pkts").unwrap())
        .sum();
    let total_bytes: f64 = flows
        .iter()
        .map(|f| f.feature("TotLen Fwd Pkts").unwrap() + f.feature("TotLen Bwd Pkts").unwrap())
        .sum();
    assert_eq!(total_pkts, ip.len() as f64, "{case}: packet conservation");
    assert_eq!(
        total_bytes,
        ip.iter().map(|p| f64::from(p.payload_len)).sum::<f64>(),
        "{case}: byte conservation"
    );
}

// ---------------------------------------------------------- fixtures

pub const C: (&str, u16) = ("10.0.0.1", 40000);
pub const S: (&str, u16) = ("10.0.0.2", 80);

pub fn data(ts: i64, from: (&str, u16), to: (&str, u16), n: u32) -> PacketRecord {
    synth::tcp(ts, from, to, TcpFlags::PSH | TcpFlags::ACK, 512, n as usize)
}

/// The hand-constructed capture suite: 20+ named cases covering closures,
/// timeouts, idle gaps, subflows, bulk transfers, direction handling,
/// IPv6, and non-IP frames.
pub fn fixture_suite() -> Vec<(&'static str, Vec<PacketRecord>)> {
    let mut cases: Vec<(&str, Vec<PacketRecord>)> = vec![];

    cases.push(("single udp packet", vec![synth::udp(5, C, S, 60)]));
    cases.push(("single syn", vec![synth::tcp(0, C, S, TcpFlags::SYN, 1000, 0)]));
    cases.push((
        "two forward udp",
        vec![synth::udp(0, C, S, 100), synth::udp(1_000_000, C, S, 200)],
    ));
    cases.push((
        "forward and reply",
        vec![synth::udp(0, C, S, 40), synth::udp(900, S, C, 120)],
    ));
    cases.push((
        "clean tcp session",
        vec![
            synth::tcp(0, C, S, TcpFlags::SYN, 64240, 0),
            synth::tcp(150, S, C, TcpFlags::SYN | TcpFlags::ACK, 65160, 0),
            synth::tcp(280, C, S, TcpFlags::ACK, 502, 0),
            data(400, C, S, 120),
            data(900, S, C, 1400),
            data(1400, S, C, 800),
            synth::tcp(1900, C, S, TcpFlags::FIN | TcpFlags::ACK, 502, 0),
            synth::tcp(2100, S, C, TcpFlags::FIN | TcpFlags::ACK, 509, 0),
            synth::tcp(2300, C, S, TcpFlags::ACK, 502, 0),
        ],
    ));
    cases.push((
        "rst mid transfer",
        vec![
            synth::tcp(0, C, S, TcpFlags::SYN, 100, 0),
            synth::tcp(100, S, C, TcpFlags::SYN | TcpFlags::ACK, 100, 0),
            data(200, C, S, 700),
            synth::tcp(300, S, C, TcpFlags::RST | TcpFlags::ACK, 0, 0),
            // traffic after the reset forms a second flow
            data(400, C, S, 50),
        ],
    ));
    cases.push((
        "half close stays open",
        vec![
            data(0, C, S, 10),
            synth::tcp(100, C, S, TcpFlags::FIN | TcpFlags::ACK, 64, 0),
            data(200, S, C, 20),
        ],
    ));
    cases.push((
        "fin both with teardown tail",
        vec![
            data(0, C, S, 10),
            synth::tcp(100, C, S, TcpFlags::FIN | TcpFlags::ACK, 64, 0),
            synth::tcp(200, S, C, TcpFlags::FIN | TcpFlags::ACK, 64, 0),
            synth::tcp(300, C, S, TcpFlags::ACK, 64, 0),
            synth::tcp(400, S, C, TcpFlags::ACK, 64, 0),
        ],
    ));
    cases.push((
        "data after fin displaces",
        vec![
            synth::tcp(0, C, S, TcpFlags::FIN | TcpFlags::ACK, 64, 0),
            synth::tcp(100, S, C, TcpFlags::FIN | TcpFlags::ACK, 64, 0),
            data(200, C, S, 99),
        ],
    ));
    cases.push((
        "timeout boundary",
        vec![
            synth::udp(0, C, S, 1),
            synth::udp(FLOW_TIMEOUT_US, C, S, 2),      // exactly at: joins
            synth::udp(FLOW_TIMEOUT_US + 1, C, S, 3),  // 1µs past: new flow
            synth::udp(2 * FLOW_TIMEOUT_US + 2, C, S, 4),
        ],
    ));
    cases.push((
        "idle gaps",
        vec![
            synth::udp(0, C, S, 5),
            synth::udp(1_000_000, C, S, 5),
            synth::udp(8_000_000, C, S, 5),
            synth::udp(9_000_000, C, S, 5),
            synth::udp(20_000_000, C, S, 5),
        ],
    ));
    cases.push((
        "subflow gaps",
        vec![
            synth::udp(0, C, S, 5),
            synth::udp(999_999, C, S, 5),
            synth::udp(2_000_000, C, S, 5),   // gap 1_000_001 > 1s
            synth::udp(3_000_000, C, S, 5),   // gap exactly 1s: same subflow
            synth::udp(4_500_000, C, S, 5),   // gap 1.5s
        ],
    ));
    cases.push((
        "forward bulk run of six",
        (0..6).map(|i| data(i * 100, C, S, 500 + i as u32)).collect(),
    ));
    cases.push((
        "bulk broken by gap",
        vec![
            data(0, C, S, 100),
            data(100, C, S, 100),
            data(200, C, S, 100),
            data(1_700_000, C, S, 100), // > 1s after previous: run restarts
            data(1_700_100, C, S, 100),
            data(1_700_200, C, S, 100),
        ],
    ));
    cases.push((
        "bulk interrupted by opposite bulk",
        vec![
            data(0, C, S, 10),
            data(100, C, S, 10),
            data(200, C, S, 10),
            data(300, S, C, 20),
            data(400, S, C, 20),
            data(500, S, C, 20),
            data(600, S, C, 20), // bwd bulk commits, start 300 > fwd run start 0
            data(700, C, S, 10), // fwd run restarts here
            data(800, C, S, 10),
            data(900, C, S, 10),
            data(1000, C, S, 10), // fwd bulk of exactly 4
        ],
    ));
    cases.push((
        "acks do not break a bulk",
        vec![
            data(0, C, S, 100),
            data(100, C, S, 100),
            synth::tcp(150, C, S, TcpFlags::ACK, 64, 0),
            synth::tcp(160, S, C, TcpFlags::ACK, 64, 0),
            data(200, C, S, 100),
            data(300, C, S, 100),
        ],
    ));
    cases.push((
        "interleaved conversations",
        vec![
            synth::udp(0, C, ("10.0.0.9", 53), 10),
            synth::udp(50, ("10.0.0.3", 1234), S, 20),
            synth::udp(100, ("10.0.0.9", 53), C, 30),
            synth::udp(150, S, ("10.0.0.3", 1234), 40),
            synth::udp(200, C, ("10.0.0.9", 53), 50),
        ],
    ));
    cases.push((
        "same hosts different ports",
        vec![
            synth::udp(0, ("10.0.0.1", 1111), ("10.0.0.2", 80), 10),
            synth::udp(100, ("10.0.0.1", 2222), ("10.0.0.2", 80), 20),
            synth::udp(200, ("10.0.0.2", 80), ("10.0.0.1", 1111), 30),
        ],
    ));
    cases.push((
        "server speaks first",
        vec![
            data(0, S, C, 1000),
            data(100, C, S, 10),
            data(200, S, C, 1000),
        ],
    ));
    cases.push((
        "ipv6 tcp session",
        vec![
            synth::tcp(0, ("2001:db8::1", 5000), ("2001:db8::2", 443), TcpFlags::SYN, 1000, 0),
            synth::tcp(
                200,
                ("2001:db8::2", 443),
                ("2001:db8::1", 5000),
                TcpFlags::SYN | TcpFlags::ACK,
                2000,
                0,
            ),
            synth::tcp(
                400,
                ("2001:db8::1", 5000),
                ("2001:db8::2", 443),
                TcpFlags::PSH | TcpFlags::ACK,
                1000,
                333,
            ),
        ],
    ));
    cases.push((
        "udp ping pong has no init windows",
        (0..8)
            .map(|i| {
                let (a, b) = if i % 2 == 0 { (C, S) } else { (S, C) };
                synth::udp(i * 10_000, a, b, 64)
            })
            .collect(),
    ));
    cases.push((
        "urg and ece flag soup",
        vec![
            synth::tcp(0, C, S, TcpFlags::SYN | TcpFlags::ECE | TcpFlags::CWR, 100, 0),
            synth::tcp(100, S, C, TcpFlags::SYN | TcpFlags::ACK | TcpFlags::ECE, 100, 0),
            synth::tcp(200, C, S, TcpFlags::URG | TcpFlags::ACK, 100, 55),
            synth::tcp(300, S, C, TcpFlags::URG | TcpFlags::PSH | TcpFlags::ACK, 100, 66),
        ],
    ));
    cases.push((
        "payload extremes",
        vec![
            synth::udp(0, C, S, 0),
            synth::udp(10, C, S, 1400),
            synth::udp(20, S, C, 0),
            synth::udp(30, S, C, 1),
        ],
    ));
    cases.push((
        "zero duration multi packet",
        vec![
            synth::udp(77, C, S, 10),
            synth::udp(77, C, S, 20),
            synth::udp(77, S, C, 30),
        ],
    ));
    cases.push((
        "non ip frames are skipped",
        vec![
            synth::arp(0),
            synth::udp(100, C, S, 10),
            synth::arp(200),
            synth::udp(300, S, C, 20),
            synth::arp(400),
        ],
    ));
    cases
}

/// Look a fixture up by name.
pub fn fixture(cases: &[(&'static str, Vec<PacketRecord>)], name: &str) -> Vec<PacketRecord> {
    cases
        .iter()
        .find(|(n, _)| *n == name)
        .unwrap_or_else(|| panic!("no fixture named {name:?}"))
        .1
        .clone()
}
