//! Deterministic synthetic traffic and annotations.
//!
//! Everything here is seeded: the same (seed, parameters) produce
//! byte-identical packets and annotations on every platform. Used by the
//! test suites and benchmarks, and handy for demoing the pipeline without
//! real captures.
//!
//! Packets are built as genuine Ethernet frames and run through the real
//! dissector, so a synthetic [`PacketRecord`] is exactly what reading the
//! same frame from a capture file would yield.

use std::fmt::Write as _;
use std::net::IpAddr;
use std::path::Path;

use chrono::{DateTime, NaiveDate, SecondsFormat};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::annotations::{AnomalyFilter, AnomalyRecord, DayAnnotations, Label, TimeWindow};
use crate::capture::{dissect_frame, PacketRecord, TcpFlags, LINKTYPE_ETHERNET};
use crate::{derive_seed, Error, Result};

pub const DAY_US: i64 = 86_400_000_000;

/// Midnight UTC of `date` in µs since the epoch.
pub fn day_start_us(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("00:00:00 always exists")
        .and_utc()
        .timestamp_micros()
}

fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum = 0u32;
    for chunk in header.chunks(2) {
        sum += u32::from(u16::from_be_bytes([chunk[0], chunk[1]]));
    }
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

fn ethernet(ethertype: u16, payload: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(14 + payload.len());
    f.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x01]); // dst MAC
    f.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02]); // src MAC
    f.extend_from_slice(&ethertype.to_be_bytes());
    f.extend_from_slice(payload);
    f
}

fn ip_packet(protocol: u8, src: IpAddr, dst: IpAddr, body: &[u8]) -> Vec<u8> {
    match (src, dst) {
        (IpAddr::V4(s), IpAddr::V4(d)) => {
            let mut h = vec![0u8; 20];
            h[0] = 0x45;
            h[2..4].copy_from_slice(&(20 + body.len() as u16).to_be_bytes());
            h[8] = 64; // TTL
            h[9] = protocol;
            h[12..16].copy_from_slice(&s.octets());
            h[16..20].copy_from_slice(&d.octets());
            let sum = ipv4_checksum(&h);
            h[10..12].copy_from_slice(&sum.to_be_bytes());
            h.extend_from_slice(body);
            ethernet(0x0800, &h)
        }
        (IpAddr::V6(s), IpAddr::V6(d)) => {
            let mut h = vec![0u8; 40];
            h[0] = 0x60;
            h[4..6].copy_from_slice(&(body.len() as u16).to_be_bytes());
            h[6] = protocol;
            h[7] = 64; // hop limit
            h[8..24].copy_from_slice(&s.octets());
            h[24..40].copy_from_slice(&d.octets());
            h.extend_from_slice(body);
            ethernet(0x86dd, &h)
        }
        _ => panic!("mixed v4/v6 endpoints"),
    }
}

fn payload_bytes(len: usize) -> impl Iterator<Item = u8> {
    (0..len).map(|i| (i % 251) as u8)
}

fn parse_ip(s: &str) -> IpAddr {
    s.parse().expect("synth endpoint must be a literal IP")
}

/// A synthetic UDP packet as the dissector would report it.
pub fn udp(ts_us: i64, src: (&str, u16), dst: (&str, u16), payload_len: usize) -> PacketRecord {
    let mut seg = Vec::with_capacity(8 + payload_len);
    seg.extend_from_slice(&src.1.to_be_bytes());
    seg.extend_from_slice(&dst.1.to_be_bytes());
    seg.extend_from_slice(&(8 + payload_len as u16).to_be_bytes());
    seg.extend_from_slice(&[0, 0]); // checksum unused
    seg.extend(payload_bytes(payload_len));
    let frame = ip_packet(17, parse_ip(src.0), parse_ip(dst.0), &seg);
    let wire_len = frame.len() as u32;
    dissect_frame(LINKTYPE_ETHERNET, ts_us, wire_len, frame)
}

/// A synthetic TCP packet; `flags` is the raw flag byte (see [`TcpFlags`]).
pub fn tcp(
    ts_us: i64,
    src: (&str, u16),
    dst: (&str, u16),
    flags: u8,
    window: u16,
    payload_len: usize,
) -> PacketRecord {
    let mut seg = vec![0u8; 20];
    seg[0..2].copy_from_slice(&src.1.to_be_bytes());
    seg[2..4].copy_from_slice(&dst.1.to_be_bytes());
    seg[12] = 5 << 4; // data offset, 20-byte header
    seg[13] = flags;
    seg[14..16].copy_from_slice(&window.to_be_bytes());
    seg.extend(payload_bytes(payload_len));
    let frame = ip_packet(6, parse_ip(src.0), parse_ip(dst.0), &seg);
    let wire_len = frame.len() as u32;
    dissect_frame(LINKTYPE_ETHERNET, ts_us, wire_len, frame)
}

/// A non-IP frame (an ARP request); exercises the pass-through path.
pub fn arp(ts_us: i64) -> PacketRecord {
    let mut body = vec![0u8; 28];
    body[0..2].copy_from_slice(&1u16.to_be_bytes()); // Ethernet
    body[2..4].copy_from_slice(&0x0800u16.to_be_bytes()); // IPv4
    body[4] = 6;
    body[5] = 4;
    body[7] = 1; // request
    let frame = ethernet(0x0806, &body);
    let wire_len = frame.len() as u32;
    dissect_frame(LINKTYPE_ETHERNET, ts_us, wire_len, frame)
}

const V4_SERVERS: [(&str, u16, u8); 6] = [
    ("10.1.0.1", 80, 6),
    ("10.1.0.2", 443, 6),
    ("10.1.0.3", 53, 17),
    ("10.1.0.4", 123, 17),
    ("10.1.0.5", 25, 6),
    ("10.1.0.6", 22, 6),
];
const V6_SERVER: (&str, u16, u8) = ("2001:db8:f::1", 443, 6);

fn v4_client(i: u32) -> String {
    format!("10.2.{}.{}", i / 200, i % 200 + 1)
}

fn v6_client(i: u32) -> String {
    format!("2001:db8:c::{:x}", i + 1)
}

/// One day of deterministic mixed traffic: TCP and UDP conversations in
/// both address families plus a sprinkling of non-IP frames, time-ordered
/// and contained in `date`.
pub fn traffic_day(date: NaiveDate, seed: u64, n_packets: usize) -> Vec<PacketRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("traffic:{date}")));
    let day0 = day_start_us(date);
    let mut packets: Vec<PacketRecord> = vec![];

    while packets.len() < n_packets {
        let v6 = rng.random_ratio(1, 8);
        let (server_ip, server_port, protocol) = if v6 {
            V6_SERVER
        } else {
            V4_SERVERS[rng.random_range(0..V4_SERVERS.len())]
        };
        let client_ip = if v6 {
            v6_client(rng.random_range(0..4))
        } else {
            v4_client(rng.random_range(0..24))
        };
        let client = (client_ip.as_str(), rng.random_range(1024..65535u16));
        let server = (server_ip, server_port);
        let mut ts = day0 + rng.random_range(0..DAY_US - 130_000_000);
        let step = |rng: &mut ChaCha8Rng, ts: &mut i64| {
            *ts += if rng.random_ratio(1, 20) {
                rng.random_range(5_000_000..7_000_000) // idle-length gap
            } else {
                rng.random_range(100..1_800_000)
            };
        };

        if protocol == 6 {
            let win = || -> u16 { 64 };
            packets.push(tcp(ts, client, server, TcpFlags::SYN, 64240, 0));
            step(&mut rng, &mut ts);
            packets.push(tcp(ts, server, client, TcpFlags::SYN | TcpFlags::ACK, 65160, 0));
            let n = rng.random_range(1..=12);
            for _ in 0..n {
                step(&mut rng, &mut ts);
                let fwd = rng.random_bool(0.6);
                let (a, b) = if fwd { (client, server) } else { (server, client) };
                let payload = if rng.random_bool(0.3) { 0 } else { rng.random_range(1..1400) };
                let flags = if payload == 0 {
                    TcpFlags::ACK
                } else {
                    TcpFlags::PSH | TcpFlags::ACK
                };
                packets.push(tcp(ts, a, b, flags, win(), payload));
            }
            if rng.random_ratio(1, 20) {
                step(&mut rng, &mut ts);
                packets.push(tcp(ts, server, client, TcpFlags::RST, 0, 0));
            } else if rng.random_bool(0.7) {
                step(&mut rng, &mut ts);
                packets.push(tcp(ts, client, server, TcpFlags::FIN | TcpFlags::ACK, win(), 0));
                step(&mut rng, &mut ts);
                packets.push(tcp(ts, server, client, TcpFlags::FIN | TcpFlags::ACK, win(), 0));
                step(&mut rng, &mut ts);
                packets.push(tcp(ts, client, server, TcpFlags::ACK, win(), 0));
            }
        } else {
            let n = rng.random_range(1..=10);
            for i in 0..n {
                if i > 0 {
                    step(&mut rng, &mut ts);
                }
                let fwd = i % 2 == 0;
                let (a, b) = if fwd { (client, server) } else { (server, client) };
                packets.push(udp(ts, a, b, rng.random_range(12..512)));
            }
        }
    }
    packets.truncate(n_packets);

    for _ in 0..(n_packets / 400 + 1) {
        let ts = day0 + rng.random_range(0..DAY_US - 130_000_000);
        packets.push(arp(ts));
    }

    packets.sort_by_key(|p| p.ts_us);
    packets
}

const TAXONOMIES: [&str; 5] = ["ptmpHTTP", "alphflHTTP", "ntscIC", "sc", "unknown"];
const HEURISTICS: [i64; 4] = [20, 50, 75, 999];

/// Deterministic annotations for `packets`: every anomaly's first filter
/// is sampled from an actual packet (and anchored inside its window when
/// one is drawn), so anomalies always match some traffic.
pub fn annotations_day(
    date: NaiveDate,
    seed: u64,
    packets: &[PacketRecord],
    n_anomalies: usize,
) -> DayAnnotations {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("annotations:{date}")));
    let day0 = day_start_us(date);
    let ip: Vec<&PacketRecord> = packets.iter().filter(|p| p.is_ip()).collect();
    assert!(!ip.is_empty() || n_anomalies == 0, "no IP traffic to annotate");

    let mut anomalies = vec![];
    for i in 0..n_anomalies {
        let label = match rng.random_range(0..10) {
            0..=3 => Label::Anomalous,
            4..=7 => Label::Suspicious,
            _ => Label::Notice,
        };
        let anchor = ip[rng.random_range(0..ip.len())];
        let window = if rng.random_bool(0.5) {
            let from = (anchor.ts_us - rng.random_range(0..5_000_000)).max(day0);
            let to = (anchor.ts_us + rng.random_range(1_000_000..30_000_000))
                .min(day0 + DAY_US - 1);
            Some(TimeWindow::new(from, to).expect("from <= anchor <= to"))
        } else {
            None
        };

        let n_filters = rng.random_range(1..=3);
        let mut filters: Vec<AnomalyFilter> = vec![];
        for j in 0..n_filters {
            let p = if j == 0 { anchor } else { ip[rng.random_range(0..ip.len())] };
            let t = p.five_tuple().expect("sampled from IP packets");
            let mut f = AnomalyFilter { window, ..Default::default() };
            match rng.random_range(0..7) {
                0 => f.src_ip = Some(t.src_ip),
                1 => f.dst_ip = Some(t.dst_ip),
                2 => {
                    f.src_ip = Some(t.src_ip);
                    f.dst_ip = Some(t.dst_ip);
                }
                3 => {
                    f.src_ip = Some(t.src_ip);
                    f.dst_port = Some(t.dst_port);
                }
                4 => {
                    f.dst_ip = Some(t.dst_ip);
                    f.dst_port = Some(t.dst_port);
                    f.protocol = Some(t.protocol);
                }
                5 => {
                    f.dst_port = Some(t.dst_port);
                    f.protocol = Some(t.protocol);
                }
                _ => {
                    f.src_ip = Some(t.src_ip);
                    f.dst_ip = Some(t.dst_ip);
                    f.src_port = Some(t.src_port);
                    f.dst_port = Some(t.dst_port);
                    f.protocol = Some(t.protocol);
                }
            }
            if !filters.contains(&f) {
                filters.push(f);
            }
        }

        anomalies.push(AnomalyRecord {
            anomaly_id: format!("{}_a{i:03}", date.format("%Y%m%d")),
            label,
            taxonomy: TAXONOMIES[rng.random_range(0..TAXONOMIES.len())].to_string(),
            heuristic: HEURISTICS[rng.random_range(0..HEURISTICS.len())],
            distance: (rng.random_range(-1.0..8.0f64) * 1000.0).round() / 1000.0,
            nb_detectors: rng.random_range(1..=12),
            filters,
        });
    }
    DayAnnotations {
        date,
        anomalies,
        source_files: vec![format!("synthetic:seed={seed}")],
    }
}

/// Write anomalies in canonical annotation-CSV form (windows are not
/// expressible there; window-only filters are skipped).
pub fn write_annotation_csv(path: impl AsRef<Path>, anomalies: &[AnomalyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(crate::table::csv_err)?;
    w.write_record([
        "anomaly_id",
        "label",
        "taxonomy",
        "heuristic",
        "distance",
        "nb_detectors",
        "src_ip",
        "src_port",
        "dst_ip",
        "dst_port",
        "protocol",
    ])
    .map_err(crate::table::csv_err)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for a in anomalies {
        for f in &a.filters {
            if f.expression().is_unconstrained() {
                continue;
            }
            w.write_record([
                a.anomaly_id.clone(),
                a.label.to_string(),
                a.taxonomy.clone(),
                a.heuristic.to_string(),
                a.distance.to_string(),
                a.nb_detectors.to_string(),
                opt(f.src_ip.map(|v| v.to_string())),
                opt(f.src_port.map(|v| v.to_string())),
                opt(f.dst_ip.map(|v| v.to_string())),
                opt(f.dst_port.map(|v| v.to_string())),
                opt(f.protocol.map(|v| v.to_string())),
            ])
            .map_err(crate::table::csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn rfc3339(us: i64) -> String {
    DateTime::from_timestamp_micros(us)
        .expect("µs timestamp in range")
        .to_rfc3339_opts(SecondsFormat::Micros, true)
}

/// Write the windowed anomalies in canonical ADMD XML form. All windowed
/// filters of one anomaly must share the window (the format has one
/// interval per anomaly); the synthetic generator guarantees this.
pub fn write_annotation_admd(path: impl AsRef<Path>, anomalies: &[AnomalyRecord]) -> Result<()> {
    let mut x = String::from("<anomalies>\n");
    for a in anomalies {
        let windowed: Vec<&AnomalyFilter> =
            a.filters.iter().filter(|f| f.window.is_some()).collect();
        let Some(first) = windowed.first() else { continue };
        let window = first.window.expect("filtered on is_some");
        if windowed.iter().any(|f| f.window != Some(window)) {
            return Err(Error::Contract(format!(
                "anomaly {:?} has filters with differing windows; not expressible as one interval",
                a.anomaly_id
            )));
        }
        let _ = write!(
            x,
            "  <anomaly id=\"{}\" label=\"{}\" taxonomy=\"{}\" heuristic=\"{}\" \
             distance=\"{}\" nb_detectors=\"{}\">\n    <interval from=\"{}\" to=\"{}\"/>\n",
            a.anomaly_id,
            a.label,
            a.taxonomy,
            a.heuristic,
            a.distance,
            a.nb_detectors,
            rfc3339(window.start_us),
            rfc3339(window.stop_us),
        );
        for f in windowed {
            let mut attrs = String::new();
            let mut put = |name: &str, v: Option<String>| {
                if let Some(v) = v {
                    let _ = write!(attrs, " {name}=\"{v}\"");
                }
            };
            put("src_ip", f.src_ip.map(|v| v.to_string()));
            put("dst_ip", f.dst_ip.map(|v| v.to_string()));
            put("src_port", f.src_port.map(|v| v.to_string()));
            put("dst_port", f.dst_port.map(|v| v.to_string()));
            put("protocol", f.protocol.map(|v| v.to_string()));
            let _ = writeln!(x, "    <filter{attrs}/>");
        }
        x.push_str("  </anomaly>\n");
    }
    x.push_str("</anomalies>\n");
    std::fs::write(path, x)?;
    Ok(())
}
