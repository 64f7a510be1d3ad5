//! Classic pcap reading and writing.
//!
//! The reader accepts all four magic numbers (little/big endian crossed
//! with µs/ns timestamp resolution) and transparently unwraps gzip
//! containers detected by their leading magic bytes. The writer always
//! emits little-endian µs files — the normalization is lossless because
//! records carry integer µs timestamps and the original frame bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;

use crate::{Error, Result};

use super::{dissect_frame, PacketRecord};

const MAGIC_US: u32 = 0xa1b2_c3d4;
const MAGIC_NS: u32 = 0xa1b2_3c4d;
const MAGIC_US_SWAPPED: u32 = 0xd4c3_b2a1;
const MAGIC_NS_SWAPPED: u32 = 0x4d3c_b2a1;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Upper bound on a single captured frame; anything larger means the
/// length field is garbage and the stream is corrupt.
const MAX_FRAME_LEN: u32 = 64 * 1024 * 1024;

/// Streaming pcap reader yielding [`PacketRecord`]s in file order.
pub struct CaptureReader {
    src: Box<dyn Read>,
    path: PathBuf,
    swapped: bool,
    nanos: bool,
    linktype: u32,
    yielded: u64,
    poisoned: bool,
}

impl CaptureReader {
    /// Open a plain or gzip-compressed pcap file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = BufReader::new(File::open(&path)?);
        let mut magic = [0u8; 2];
        let n = read_up_to(&mut file, &mut magic)?;
        let mut src: Box<dyn Read> = if n == 2 && magic == GZIP_MAGIC {
            Box::new(BufReader::new(MultiGzDecoder::new(Prepend {
                head: magic.to_vec(),
                tail: file,
            })))
        } else {
            Box::new(Prepend {
                head: magic[..n].to_vec(),
                tail: file,
            })
        };

        let mut header = [0u8; 24];
        src.read_exact(&mut header).map_err(|_| {
            Error::Parse(format!("{}: too short for a pcap global header", path.display()))
        })?;
        let magic = u32::from_le_bytes(header[0..4].try_into().unwrap());
        let (swapped, nanos) = match magic {
            MAGIC_US => (false, false),
            MAGIC_NS => (false, true),
            MAGIC_US_SWAPPED => (true, false),
            MAGIC_NS_SWAPPED => (true, true),
            other => {
                return Err(Error::Parse(format!(
                    "{}: unrecognized capture magic {other:#010x}",
                    path.display()
                )))
            }
        };
        let linktype = read_u32(&header[20..24], swapped);
        Ok(CaptureReader {
            src,
            path,
            swapped,
            nanos,
            linktype,
            yielded: 0,
            poisoned: false,
        })
    }

    /// The file's pcap link type (Ethernet, raw IP, ...).
    pub fn linktype(&self) -> u32 {
        self.linktype
    }

    fn next_record(&mut self) -> Result<Option<PacketRecord>> {
        let mut header = [0u8; 16];
        match read_up_to(&mut self.src, &mut header)? {
            0 => return Ok(None),
            16 => {}
            _ => {
                return Err(Error::TruncatedCapture {
                    path: self.path.clone(),
                    yielded: self.yielded,
                })
            }
        }
        let sec = read_u32(&header[0..4], self.swapped);
        let frac = read_u32(&header[4..8], self.swapped);
        let incl_len = read_u32(&header[8..12], self.swapped);
        let orig_len = read_u32(&header[12..16], self.swapped);
        if incl_len > MAX_FRAME_LEN {
            return Err(Error::Parse(format!(
                "{}: implausible packet length {incl_len} after {} packets",
                self.path.display(),
                self.yielded
            )));
        }
        let mut frame = vec![0u8; incl_len as usize];
        if read_up_to(&mut self.src, &mut frame)? != frame.len() {
            return Err(Error::TruncatedCapture {
                path: self.path.clone(),
                yielded: self.yielded,
            });
        }
        let micros = if self.nanos { frac / 1000 } else { frac };
        let ts_us = i64::from(sec) * 1_000_000 + i64::from(micros);
        self.yielded += 1;
        Ok(Some(dissect_frame(self.linktype, ts_us, orig_len, frame)))
    }
}

impl Iterator for CaptureReader {
    type Item = Result<PacketRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.poisoned {
            return None;
        }
        match self.next_record() {
            Ok(Some(rec)) => Some(Ok(rec)),
            Ok(None) => None,
            Err(e) => {
                self.poisoned = true;
                Some(Err(e))
            }
        }
    }
}

/// Read a whole capture into memory. Convenience wrapper for tests and
/// small partitions; large files should iterate [`CaptureReader`].
pub fn read_capture(path: impl AsRef<Path>) -> Result<Vec<PacketRecord>> {
    CaptureReader::open(path)?.collect()
}

/// Streaming pcap writer; see module docs for the normalization rules.
pub struct CaptureWriter {
    dst: BufWriter<File>,
    count: u64,
}

impl CaptureWriter {
    pub fn create(path: impl AsRef<Path>, linktype: u32) -> Result<Self> {
        let mut dst = BufWriter::new(File::create(path)?);
        dst.write_all(&MAGIC_US.to_le_bytes())?;
        dst.write_all(&2u16.to_le_bytes())?; // version major
        dst.write_all(&4u16.to_le_bytes())?; // version minor
        dst.write_all(&0i32.to_le_bytes())?; // thiszone
        dst.write_all(&0u32.to_le_bytes())?; // sigfigs
        dst.write_all(&262_144u32.to_le_bytes())?; // snaplen
        dst.write_all(&linktype.to_le_bytes())?;
        Ok(CaptureWriter { dst, count: 0 })
    }

    pub fn write(&mut self, rec: &PacketRecord) -> Result<()> {
        if rec.raw_frame.is_empty() {
            return Err(Error::Contract(
                "packet record carries no raw frame bytes; cannot rewrite".into(),
            ));
        }
        let sec = rec.ts_us.div_euclid(1_000_000);
        let micros = rec.ts_us.rem_euclid(1_000_000);
        self.dst.write_all(&(sec as u32).to_le_bytes())?;
        self.dst.write_all(&(micros as u32).to_le_bytes())?;
        self.dst
            .write_all(&(rec.raw_frame.len() as u32).to_le_bytes())?;
        self.dst.write_all(&rec.wire_len.to_le_bytes())?;
        self.dst.write_all(&rec.raw_frame)?;
        self.count += 1;
        Ok(())
    }

    /// Flush and return the number of packets written.
    pub fn finish(mut self) -> Result<u64> {
        self.dst.flush()?;
        Ok(self.count)
    }
}

/// Write `records` to `path` as a little-endian µs pcap with the given
/// link type; returns the packet count written.
pub fn write_capture<'a>(
    path: impl AsRef<Path>,
    linktype: u32,
    records: impl IntoIterator<Item = &'a PacketRecord>,
) -> Result<u64> {
    let mut w = CaptureWriter::create(path, linktype)?;
    for rec in records {
        w.write(rec)?;
    }
    w.finish()
}

/// Read up to `buf.len()` bytes, returning how many were available before
/// EOF. Unlike `read_exact`, a clean EOF at zero bytes is not an error.
fn read_up_to(src: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match src.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

fn read_u32(bytes: &[u8], swapped: bool) -> u32 {
    let arr: [u8; 4] = bytes.try_into().unwrap();
    if swapped {
        u32::from_be_bytes(arr)
    } else {
        u32::from_le_bytes(arr)
    }
}

/// A reader that replays already-consumed peek bytes before its inner
/// source.
struct Prepend<R> {
    head: Vec<u8>,
    tail: R,
}

impl<R: Read> Read for Prepend<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        if !self.head.is_empty() {
            let n = self.head.len().min(buf.len());
            buf[..n].copy_from_slice(&self.head[..n]);
            self.head.drain(..n);
            return Ok(n);
        }
        self.tail.read(buf)
    }
}
