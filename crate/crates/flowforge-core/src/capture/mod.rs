//! Packet capture input/output and link-layer dissection.

mod packet;
mod pcap;

pub use packet::dissect_frame;
pub use pcap::{read_capture, write_capture, CaptureReader, CaptureWriter};

use std::fmt;
use std::net::IpAddr;

/// Link types we understand; anything else is carried through opaquely.
pub const LINKTYPE_ETHERNET: u32 = 1;
pub const LINKTYPE_RAW_IP: u32 = 101;

/// TCP flag byte (FIN lowest bit through CWR highest).
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct TcpFlags(pub u8);

impl TcpFlags {
    pub const FIN: u8 = 0x01;
    pub const SYN: u8 = 0x02;
    pub const RST: u8 = 0x04;
    pub const PSH: u8 = 0x08;
    pub const ACK: u8 = 0x10;
    pub const URG: u8 = 0x20;
    pub const ECE: u8 = 0x40;
    pub const CWR: u8 = 0x80;

    pub fn has(self, mask: u8) -> bool {
        self.0 & mask != 0
    }
}

impl fmt::Debug for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [(u8, &str); 8] = [
            (TcpFlags::FIN, "FIN"),
            (TcpFlags::SYN, "SYN"),
            (TcpFlags::RST, "RST"),
            (TcpFlags::PSH, "PSH"),
            (TcpFlags::ACK, "ACK"),
            (TcpFlags::URG, "URG"),
            (TcpFlags::ECE, "ECE"),
            (TcpFlags::CWR, "CWR"),
        ];
        let mut parts = vec![];
        for (mask, name) in NAMES {
            if self.has(mask) {
                parts.push(name);
            }
        }
        write!(f, "TcpFlags({})", parts.join("|"))
    }
}

/// The network/transport 5-tuple of a dissected packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FiveTuple {
    pub src_ip: IpAddr,
    pub dst_ip: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
}

/// One parsed packet.
///
/// Non-IP frames (ARP, unsupported link types, frames too truncated to
/// dissect) keep `protocol = None` and empty address fields; downstream
/// stages skip them but the raw bytes survive a rewrite untouched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketRecord {
    /// Microseconds since the Unix epoch (ns captures truncated by integer
    /// division).
    pub ts_us: i64,
    pub src_ip: Option<IpAddr>,
    pub dst_ip: Option<IpAddr>,
    /// 0 for protocols without ports.
    pub src_port: u16,
    pub dst_port: u16,
    /// IP protocol number; `None` marks a non-IP frame.
    pub protocol: Option<u8>,
    pub ip_header_len: u32,
    pub transport_header_len: u32,
    /// Transport payload bytes, from the IP length fields as recorded.
    pub payload_len: u32,
    /// Original on-wire length from the capture header.
    pub wire_len: u32,
    /// Present iff protocol is TCP.
    pub tcp_flags: Option<TcpFlags>,
    /// Present iff protocol is TCP.
    pub tcp_window: Option<u16>,
    /// Captured frame bytes, preserved for lossless rewriting.
    pub raw_frame: Vec<u8>,
}

impl PacketRecord {
    pub fn is_ip(&self) -> bool {
        self.protocol.is_some()
    }

    /// The 5-tuple when the packet is IP, `None` otherwise.
    pub fn five_tuple(&self) -> Option<FiveTuple> {
        Some(FiveTuple {
            src_ip: self.src_ip?,
            dst_ip: self.dst_ip?,
            src_port: self.src_port,
            dst_port: self.dst_port,
            protocol: self.protocol?,
        })
    }
}
