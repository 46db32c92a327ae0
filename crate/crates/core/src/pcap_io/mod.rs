//! Readers and writers for classic PCAP and PCAPNG capture files.
//!
//! Everything this module writes is little-endian with microsecond
//! timestamps. The readers accept either byte order and convert
//! nanosecond (PCAP) or arbitrary `if_tsresol` (PCAPNG) timestamps down to
//! microseconds.

mod pcap;
mod pcapng;
mod validate;

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::Path;

pub use pcap::{read_pcap, write_pcap, PcapReader, PcapWriter, PCAP_HEADER_LEN, PCAP_RECORD_HEADER_LEN};
pub use pcapng::{
    read_pcapng, write_pcapng, PcapngOption, PcapngReader, PcapngWriter, BLOCK_TYPE_EPB,
    BLOCK_TYPE_IDB, BLOCK_TYPE_SHB, BYTE_ORDER_MAGIC, OPT_COMMENT, OPT_ENDOFOPT,
};
pub use validate::{validate_pcapng, ValidationReport};

/// Largest captured length accepted from any input file.
pub const SNAPLEN_CAP: u32 = 262_144;

/// Ethernet link-layer code.
pub const LINKTYPE_ETHERNET: u32 = 1;

/// Ticks per second for every file this crate writes.
pub const MICROS_PER_SEC: u64 = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum PcapError {
    #[error("bad magic number {magic:#010x}: not a {expected} file")]
    BadMagic { magic: u32, expected: &'static str },
    #[error("truncated record at byte offset {offset}")]
    TruncatedRecord { offset: u64 },
    #[error("record at byte offset {offset} has captured length {length} (cap {SNAPLEN_CAP})")]
    OversizedRecord { offset: u64, length: u32 },
    #[error("block at byte offset {offset}: leading length {leading} != trailing length {trailing}")]
    BlockLengthMismatch { offset: u64, leading: u32, trailing: u32 },
    #[error("malformed block at byte offset {offset}: {reason}")]
    MalformedBlock { offset: u64, reason: String },
    #[error("packet at byte offset {offset} references interface {interface_id}, only {known} seen")]
    InterfaceIdOutOfRange { offset: u64, interface_id: u32, known: usize },
    #[error("comment option at byte offset {offset} is not valid UTF-8")]
    InvalidComment { offset: u64 },
    #[error("comment of {length} bytes does not fit a 16-bit option length")]
    CommentTooLong { length: usize },
    #[error("record link type {found} differs from capture link type {expected}")]
    LinkTypeMismatch { expected: u32, found: u32 },
    #[error("sink failure: {0}")]
    SinkFailure(#[source] io::Error),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = PcapError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    pub(crate) fn u16(self, b: [u8; 2]) -> u16 {
        match self {
            ByteOrder::Little => u16::from_le_bytes(b),
            ByteOrder::Big => u16::from_be_bytes(b),
        }
    }

    pub(crate) fn u32(self, b: [u8; 4]) -> u32 {
        match self {
            ByteOrder::Little => u32::from_le_bytes(b),
            ByteOrder::Big => u32::from_be_bytes(b),
        }
    }
}

/// One captured packet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawPacketRecord {
    /// Microseconds since the Unix epoch.
    pub timestamp_us: u64,
    pub original_length: u32,
    pub link_type: u32,
    pub data: Vec<u8>,
}

impl RawPacketRecord {
    pub fn new(timestamp_us: u64, link_type: u32, data: Vec<u8>) -> Self {
        let original_length = data.len() as u32;
        RawPacketRecord { timestamp_us, original_length, link_type, data }
    }

    pub fn captured_length(&self) -> u32 {
        self.data.len() as u32
    }

    /// Timestamp as floating-point seconds.
    pub fn timestamp_secs(&self) -> f64 {
        self.timestamp_us as f64 / MICROS_PER_SEC as f64
    }

    pub(crate) fn split_timestamp(&self) -> (u32, u32) {
        (
            (self.timestamp_us / MICROS_PER_SEC) as u32,
            (self.timestamp_us % MICROS_PER_SEC) as u32,
        )
    }
}

/// Per-capture properties shared by all packets of a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaptureMeta {
    pub link_type: u32,
    /// Ticks per second. Always [`MICROS_PER_SEC`] for written files.
    pub timestamp_resolution: u64,
    pub byte_order: ByteOrder,
}

impl CaptureMeta {
    pub fn new(link_type: u32) -> Self {
        CaptureMeta { link_type, timestamp_resolution: MICROS_PER_SEC, byte_order: ByteOrder::Little }
    }
}

impl Default for CaptureMeta {
    fn default() -> Self {
        CaptureMeta::new(LINKTYPE_ETHERNET)
    }
}

/// A packet read from either file format, with its comment if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapturedPacket {
    pub record: RawPacketRecord,
    pub comment: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureFormat {
    Pcap,
    Pcapng,
}

impl CaptureFormat {
    /// Classifies a capture by its first four bytes.
    pub fn sniff(magic: [u8; 4]) -> Option<Self> {
        let le = u32::from_le_bytes(magic);
        let be = u32::from_be_bytes(magic);
        if pcap::is_pcap_magic(le) || pcap::is_pcap_magic(be) {
            Some(CaptureFormat::Pcap)
        } else if le == BLOCK_TYPE_SHB {
            Some(CaptureFormat::Pcapng)
        } else {
            None
        }
    }
}

type Prefixed<R> = io::Chain<io::Cursor<[u8; 4]>, R>;

/// Reader over either format, picked from the file's magic number.
pub enum CaptureReader<R: Read> {
    Pcap(PcapReader<Prefixed<R>>),
    Pcapng(PcapngReader<Prefixed<R>>),
}

impl<R: Read> CaptureReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => PcapError::TruncatedRecord { offset: 0 },
            _ => PcapError::Io(e),
        })?;
        let chained = io::Cursor::new(magic).chain(input);
        match CaptureFormat::sniff(magic) {
            Some(CaptureFormat::Pcap) => Ok(CaptureReader::Pcap(PcapReader::new(chained)?)),
            Some(CaptureFormat::Pcapng) => Ok(CaptureReader::Pcapng(PcapngReader::new(chained)?)),
            None => Err(PcapError::BadMagic { magic: u32::from_le_bytes(magic), expected: "PCAP or PCAPNG" }),
        }
    }

    pub fn format(&self) -> CaptureFormat {
        match self {
            CaptureReader::Pcap(_) => CaptureFormat::Pcap,
            CaptureReader::Pcapng(_) => CaptureFormat::Pcapng,
        }
    }

    pub fn meta(&self) -> CaptureMeta {
        match self {
            CaptureReader::Pcap(r) => r.meta(),
            CaptureReader::Pcapng(r) => r.meta(),
        }
    }

    pub fn next_packet(&mut self) -> Result<Option<CapturedPacket>> {
        match self {
            CaptureReader::Pcap(r) => Ok(r.next_record()?.map(|record| CapturedPacket { record, comment: None })),
            CaptureReader::Pcapng(r) => r.next_packet(),
        }
    }
}

impl<R: Read> Iterator for CaptureReader<R> {
    type Item = Result<CapturedPacket>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_packet().transpose()
    }
}

/// Opens a capture file of either format.
pub fn open_capture(path: &Path) -> Result<CaptureReader<BufReader<File>>> {
    CaptureReader::new(BufReader::with_capacity(1 << 16, File::open(path)?))
}

/// Reads exactly `buf.len()` bytes, mapping a short read to
/// [`PcapError::TruncatedRecord`] at `offset`.
pub(crate) fn read_exact_at<R: Read>(input: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => PcapError::TruncatedRecord { offset },
        _ => PcapError::Io(e),
    })
}

/// Like [`read_exact_at`] but reports a clean EOF before the first byte as `Ok(false)`.
pub(crate) fn read_exact_or_eof<R: Read>(input: &mut R, buf: &mut [u8], offset: u64) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(PcapError::TruncatedRecord { offset }),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(PcapError::Io(e)),
        }
    }
    Ok(true)
}

pub(crate) fn pad4(len: usize) -> usize {
    (len + 3) & !3
}
