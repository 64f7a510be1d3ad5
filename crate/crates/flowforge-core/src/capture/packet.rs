//! Frame dissection: Ethernet (with 802.1Q), IPv4, IPv6 (chased through
//! the common extension headers), TCP and UDP. Anything that does not
//! dissect cleanly is reported as non-IP rather than an error; captures in
//! the wild contain plenty of truncated or exotic frames and a labeling
//! pipeline must not die on them.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use super::{PacketRecord, TcpFlags, LINKTYPE_ETHERNET, LINKTYPE_RAW_IP};

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88a8;

/// Network-layer metadata extracted from one frame.
struct NetMeta {
    src_ip: IpAddr,
    dst_ip: IpAddr,
    src_port: u16,
    dst_port: u16,
    protocol: u8,
    ip_header_len: u32,
    transport_header_len: u32,
    payload_len: u32,
    tcp_flags: Option<TcpFlags>,
    tcp_window: Option<u16>,
}

/// Dissect a captured frame into a [`PacketRecord`].
///
/// `linktype` is the pcap link type of the containing file; Ethernet and
/// raw-IP are dissected, all other link types yield non-IP records.
pub fn dissect_frame(linktype: u32, ts_us: i64, wire_len: u32, frame: Vec<u8>) -> PacketRecord {
    let meta = match linktype {
        LINKTYPE_ETHERNET => dissect_ethernet(&frame),
        LINKTYPE_RAW_IP => dissect_ip(&frame),
        _ => None,
    };
    match meta {
        Some(m) => PacketRecord {
            ts_us,
            src_ip: Some(m.src_ip),
            dst_ip: Some(m.dst_ip),
            src_port: m.src_port,
            dst_port: m.dst_port,
            protocol: Some(m.protocol),
            ip_header_len: m.ip_header_len,
            transport_header_len: m.transport_header_len,
            payload_len: m.payload_len,
            wire_len,
            tcp_flags: m.tcp_flags,
            tcp_window: m.tcp_window,
            raw_frame: frame,
        },
        None => PacketRecord {
            ts_us,
            src_ip: None,
            dst_ip: None,
            src_port: 0,
            dst_port: 0,
            protocol: None,
            ip_header_len: 0,
            transport_header_len: 0,
            payload_len: 0,
            wire_len,
            tcp_flags: None,
            tcp_window: None,
            raw_frame: frame,
        },
    }
}

fn dissect_ethernet(frame: &[u8]) -> Option<NetMeta> {
    if frame.len() < 14 {
        return None;
    }
    let mut ethertype = u16::from_be_bytes([frame[12], frame[13]]);
    let mut off = 14;
    // Peel VLAN tags (single or stacked).
    while ethertype == ETHERTYPE_VLAN || ethertype == ETHERTYPE_QINQ {
        if frame.len() < off + 4 {
            return None;
        }
        ethertype = u16::from_be_bytes([frame[off + 2], frame[off + 3]]);
        off += 4;
    }
    match ethertype {
        ETHERTYPE_IPV4 | ETHERTYPE_IPV6 => dissect_ip(&frame[off..]),
        _ => None,
    }
}

fn dissect_ip(data: &[u8]) -> Option<NetMeta> {
    match data.first()? >> 4 {
        4 => dissect_ipv4(data),
        6 => dissect_ipv6(data),
        _ => None,
    }
}

fn dissect_ipv4(data: &[u8]) -> Option<NetMeta> {
    if data.len() < 20 {
        return None;
    }
    let ihl = u32::from(data[0] & 0x0f) * 4;
    if !(20..=data.len() as u32).contains(&ihl) {
        return None;
    }
    let total_len = u32::from(u16::from_be_bytes([data[2], data[3]]));
    let frag = u16::from_be_bytes([data[6], data[7]]);
    let frag_offset = frag & 0x1fff;
    let protocol = data[9];
    let src_ip = IpAddr::V4(Ipv4Addr::new(data[12], data[13], data[14], data[15]));
    let dst_ip = IpAddr::V4(Ipv4Addr::new(data[16], data[17], data[18], data[19]));
    // Non-first fragments carry no transport header.
    let transport = if frag_offset == 0 {
        Some(&data[ihl as usize..])
    } else {
        None
    };
    finish(
        src_ip,
        dst_ip,
        protocol,
        ihl,
        total_len.saturating_sub(ihl),
        transport,
    )
}

fn dissect_ipv6(data: &[u8]) -> Option<NetMeta> {
    if data.len() < 40 {
        return None;
    }
    let payload_len = u32::from(u16::from_be_bytes([data[4], data[5]]));
    let src_ip = IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&data[8..24]).unwrap()));
    let dst_ip = IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&data[24..40]).unwrap()));
    let mut next = data[6];
    let mut off = 40usize;
    let mut fragmented = false;
    // Chase the chained extension headers to the transport protocol.
    loop {
        let ext_len = match next {
            // hop-by-hop, routing, destination options
            0 | 43 | 60 => {
                if data.len() < off + 2 {
                    return None;
                }
                (usize::from(data[off + 1]) + 1) * 8
            }
            // fragment header: fixed 8 bytes
            44 => {
                if data.len() < off + 8 {
                    return None;
                }
                let frag_off = u16::from_be_bytes([data[off + 2], data[off + 3]]) >> 3;
                fragmented = fragmented || frag_off != 0;
                8
            }
            // authentication header: length in 4-byte units, minus 2
            51 => {
                if data.len() < off + 2 {
                    return None;
                }
                (usize::from(data[off + 1]) + 2) * 4
            }
            _ => break,
        };
        if data.len() < off + ext_len {
            return None;
        }
        next = data[off];
        off += ext_len;
    }
    let ext_total = (off - 40) as u32;
    let transport = if fragmented { None } else { Some(&data[off..]) };
    finish(
        src_ip,
        dst_ip,
        next,
        40 + ext_total,
        payload_len.saturating_sub(ext_total),
        transport,
    )
}

/// Complete dissection given the transport slice (`None` when the packet is
/// a non-first fragment). `after_ip_len` is the byte count following the IP
/// header according to the IP length fields — payload sizes come from here,
/// not from the possibly snaplen-truncated capture.
fn finish(
    src_ip: IpAddr,
    dst_ip: IpAddr,
    protocol: u8,
    ip_header_len: u32,
    after_ip_len: u32,
    transport: Option<&[u8]>,
) -> Option<NetMeta> {
    let mut meta = NetMeta {
        src_ip,
        dst_ip,
        src_port: 0,
        dst_port: 0,
        protocol,
        ip_header_len,
        transport_header_len: 0,
        payload_len: after_ip_len,
        tcp_flags: None,
        tcp_window: None,
    };
    let data = match transport {
        Some(d) => d,
        None => return Some(meta),
    };
    match protocol {
        6 => {
            if data.len() < 20 {
                return None;
            }
            meta.src_port = u16::from_be_bytes([data[0], data[1]]);
            meta.dst_port = u16::from_be_bytes([data[2], data[3]]);
            // Trust the declared data offset even if the snaplen cut the
            // options; flags and window sit below the 20-byte floor.
            let header_len = u32::from(data[12] >> 4) * 4;
            if header_len < 20 {
                return None;
            }
            meta.transport_header_len = header_len;
            meta.tcp_flags = Some(TcpFlags(data[13]));
            meta.tcp_window = Some(u16::from_be_bytes([data[14], data[15]]));
            meta.payload_len = after_ip_len.saturating_sub(header_len);
        }
        17 => {
            if data.len() < 8 {
                return None;
            }
            meta.src_port = u16::from_be_bytes([data[0], data[1]]);
            meta.dst_port = u16::from_be_bytes([data[2], data[3]]);
            meta.transport_header_len = 8;
            meta.payload_len = after_ip_len.saturating_sub(8);
        }
        _ => {}
    }
    Some(meta)
}
