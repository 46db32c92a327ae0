use std::io::{self, Read, Write};

use super::{
    pad4, read_exact_at, read_exact_or_eof, ByteOrder, CaptureMeta, CapturedPacket, PcapError,
    RawPacketRecord, Result, LINKTYPE_ETHERNET, MICROS_PER_SEC, SNAPLEN_CAP,
};

pub const BLOCK_TYPE_SHB: u32 = 0x0A0D_0D0A;
pub const BLOCK_TYPE_IDB: u32 = 0x0000_0001;
pub const BLOCK_TYPE_EPB: u32 = 0x0000_0006;
pub const BYTE_ORDER_MAGIC: u32 = 0x1A2B_3C4D;

pub const OPT_ENDOFOPT: u16 = 0;
pub const OPT_COMMENT: u16 = 1;
const IF_TSRESOL: u16 = 9;

const SHB_LEN: u32 = 28;
const IDB_LEN: u32 = 20;
const EPB_FIXED_LEN: usize = 32;

// Upper bound for blocks we buffer in memory (SHB, IDB, EPB).
const MAX_BUFFERED_BLOCK: u32 = 16 << 20;

/// A single TLV entry from a block's options area.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcapngOption {
    pub code: u16,
    pub value: Vec<u8>,
}

impl PcapngOption {
    pub fn comment(text: &str) -> Self {
        PcapngOption { code: OPT_COMMENT, value: text.as_bytes().to_vec() }
    }

    pub fn length(&self) -> u16 {
        self.value.len() as u16
    }

    /// Size on the wire including the 4-byte header and padding.
    pub fn wire_len(&self) -> usize {
        4 + pad4(self.value.len())
    }
}

#[derive(Debug, Clone, Copy)]
struct Interface {
    link_type: u32,
    ticks_per_sec: u128,
}

/// Streaming reader for PCAPNG files. Yields one entry per Enhanced Packet Block.
pub struct PcapngReader<R> {
    input: R,
    byte_order: ByteOrder,
    interfaces: Vec<Interface>,
    offset: u64,
    entry_offset: u64,
    body: Vec<u8>,
}

impl<R: Read> PcapngReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut reader = PcapngReader {
            input,
            byte_order: ByteOrder::Little,
            interfaces: Vec::new(),
            offset: 0,
            entry_offset: 0,
            body: Vec::new(),
        };
        let mut head = [0u8; 8];
        read_exact_at(&mut reader.input, &mut head, 0)?;
        let block_type = u32::from_le_bytes([head[0], head[1], head[2], head[3]]);
        if block_type != BLOCK_TYPE_SHB {
            return Err(PcapError::BadMagic { magic: block_type, expected: "PCAPNG" });
        }
        reader.read_section_header(head)?;
        Ok(reader)
    }

    pub fn meta(&self) -> CaptureMeta {
        let (link_type, res) = self
            .interfaces
            .first()
            .map(|i| (i.link_type, i.ticks_per_sec.min(u64::MAX as u128) as u64))
            .unwrap_or((LINKTYPE_ETHERNET, MICROS_PER_SEC));
        CaptureMeta { link_type, timestamp_resolution: res, byte_order: self.byte_order }
    }

    /// Byte offset of the next unread block.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Byte offset of the block behind the most recently returned entry.
    pub fn entry_offset(&self) -> u64 {
        self.entry_offset
    }

    fn read_section_header(&mut self, head: [u8; 8]) -> Result<()> {
        let start = self.offset;
        let mut bom = [0u8; 4];
        read_exact_at(&mut self.input, &mut bom, start)?;
        self.byte_order = if u32::from_le_bytes(bom) == BYTE_ORDER_MAGIC {
            ByteOrder::Little
        } else if u32::from_be_bytes(bom) == BYTE_ORDER_MAGIC {
            ByteOrder::Big
        } else {
            return Err(PcapError::BadMagic { magic: u32::from_le_bytes(bom), expected: "PCAPNG" });
        };
        let total = self.byte_order.u32([head[4], head[5], head[6], head[7]]);
        if total < SHB_LEN || !total.is_multiple_of(4) || total > MAX_BUFFERED_BLOCK {
            return Err(PcapError::MalformedBlock { offset: start, reason: format!("section header length {total}") });
        }
        // body after the byte-order magic, plus the trailing length
        let mut rest = vec![0u8; total as usize - 12];
        read_exact_at(&mut self.input, &mut rest, start)?;
        let trailing = self.trailing(&rest);
        if trailing != total {
            return Err(PcapError::BlockLengthMismatch { offset: start, leading: total, trailing });
        }
        self.interfaces.clear();
        self.offset = start + total as u64;
        Ok(())
    }

    fn trailing(&self, block_tail: &[u8]) -> u32 {
        let n = block_tail.len();
        self.byte_order.u32([block_tail[n - 4], block_tail[n - 3], block_tail[n - 2], block_tail[n - 1]])
    }

    /// Reads the next Enhanced Packet Block, returning the record and its options
    /// (without the terminating `opt_endofopt`).
    pub fn next_entry(&mut self) -> Result<Option<(RawPacketRecord, Vec<PcapngOption>)>> {
        loop {
            let start = self.offset;
            let mut head = [0u8; 8];
            if !read_exact_or_eof(&mut self.input, &mut head, start)? {
                return Ok(None);
            }
            let bo = self.byte_order;
            let block_type = bo.u32([head[0], head[1], head[2], head[3]]);
            if block_type == BLOCK_TYPE_SHB {
                self.read_section_header(head)?;
                continue;
            }
            let total = bo.u32([head[4], head[5], head[6], head[7]]);
            if total < 12 || !total.is_multiple_of(4) {
                return Err(PcapError::MalformedBlock { offset: start, reason: format!("block length {total}") });
            }
            let body_len = total as usize - 12;
            match block_type {
                BLOCK_TYPE_IDB | BLOCK_TYPE_EPB => {
                    if total > MAX_BUFFERED_BLOCK {
                        return Err(PcapError::MalformedBlock {
                            offset: start,
                            reason: format!("block length {total} exceeds limit"),
                        });
                    }
                    let mut body = std::mem::take(&mut self.body);
                    body.resize(body_len + 4, 0);
                    read_exact_at(&mut self.input, &mut body, start)?;
                    let trailing = self.trailing(&body);
                    if trailing != total {
                        return Err(PcapError::BlockLengthMismatch { offset: start, leading: total, trailing });
                    }
                    self.offset = start + total as u64;
                    let result = if block_type == BLOCK_TYPE_IDB {
                        self.parse_idb(&body[..body_len], start).map(|()| None)
                    } else {
                        self.parse_epb(&body[..body_len], start).map(Some)
                    };
                    self.body = body;
                    if let Some(entry) = result? {
                        self.entry_offset = start;
                        return Ok(Some(entry));
                    }
                }
                _ => {
                    let skipped = io::copy(&mut (&mut self.input).take(body_len as u64), &mut io::sink())?;
                    if skipped != body_len as u64 {
                        return Err(PcapError::TruncatedRecord { offset: start });
                    }
                    let mut tail = [0u8; 4];
                    read_exact_at(&mut self.input, &mut tail, start)?;
                    let trailing = bo.u32(tail);
                    if trailing != total {
                        return Err(PcapError::BlockLengthMismatch { offset: start, leading: total, trailing });
                    }
                    self.offset = start + total as u64;
                }
            }
        }
    }

    /// Like [`next_entry`](Self::next_entry) but reduces the options to the first comment.
    pub fn next_packet(&mut self) -> Result<Option<CapturedPacket>> {
        let Some((record, options)) = self.next_entry()? else { return Ok(None) };
        let offset = self.entry_offset;
        let comment = match options.into_iter().find(|o| o.code == OPT_COMMENT) {
            Some(opt) => Some(String::from_utf8(opt.value).map_err(|_| PcapError::InvalidComment { offset })?),
            None => None,
        };
        Ok(Some(CapturedPacket { record, comment }))
    }

    fn parse_idb(&mut self, body: &[u8], offset: u64) -> Result<()> {
        if body.len() < 8 {
            return Err(PcapError::MalformedBlock { offset, reason: "interface description too short".into() });
        }
        let bo = self.byte_order;
        let link_type = bo.u16([body[0], body[1]]) as u32;
        let mut ticks_per_sec = MICROS_PER_SEC as u128;
        for opt in parse_options(&body[8..], bo, offset)? {
            if opt.code == IF_TSRESOL && !opt.value.is_empty() {
                let v = opt.value[0];
                ticks_per_sec = if v & 0x80 != 0 {
                    let exp = (v & 0x7f) as u32;
                    if exp > 64 {
                        return Err(PcapError::MalformedBlock { offset, reason: format!("if_tsresol {v:#x}") });
                    }
                    1u128 << exp
                } else {
                    if v > 19 {
                        return Err(PcapError::MalformedBlock { offset, reason: format!("if_tsresol {v}") });
                    }
                    10u128.pow(v as u32)
                };
            }
        }
        self.interfaces.push(Interface { link_type, ticks_per_sec });
        Ok(())
    }

    fn parse_epb(&self, body: &[u8], offset: u64) -> Result<(RawPacketRecord, Vec<PcapngOption>)> {
        if body.len() < 20 {
            return Err(PcapError::MalformedBlock { offset, reason: "enhanced packet block too short".into() });
        }
        let bo = self.byte_order;
        let field = |i: usize| bo.u32([body[i], body[i + 1], body[i + 2], body[i + 3]]);
        let interface_id = field(0);
        let iface = *self.interfaces.get(interface_id as usize).ok_or(PcapError::InterfaceIdOutOfRange {
            offset,
            interface_id,
            known: self.interfaces.len(),
        })?;
        let ticks = ((field(4) as u64) << 32) | field(8) as u64;
        let caplen = field(12);
        let origlen = field(16);
        if caplen > SNAPLEN_CAP {
            return Err(PcapError::OversizedRecord { offset, length: caplen });
        }
        let data_end = 20 + caplen as usize;
        let opts_start = 20 + pad4(caplen as usize);
        if opts_start > body.len() {
            return Err(PcapError::MalformedBlock { offset, reason: format!("captured length {caplen} overruns block") });
        }
        let timestamp_us = (ticks as u128 * MICROS_PER_SEC as u128 / iface.ticks_per_sec) as u64;
        let record = RawPacketRecord {
            timestamp_us,
            original_length: origlen.max(caplen),
            link_type: iface.link_type,
            data: body[20..data_end].to_vec(),
        };
        Ok((record, parse_options(&body[opts_start..], bo, offset)?))
    }
}

impl<R: Read> Iterator for PcapngReader<R> {
    type Item = Result<(RawPacketRecord, Vec<PcapngOption>)>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_entry().transpose()
    }
}

/// Parses an options area up to `opt_endofopt` or the end of the slice.
pub(crate) fn parse_options(mut area: &[u8], bo: ByteOrder, offset: u64) -> Result<Vec<PcapngOption>> {
    let mut options = Vec::new();
    while area.len() >= 4 {
        let code = bo.u16([area[0], area[1]]);
        let len = bo.u16([area[2], area[3]]) as usize;
        if code == OPT_ENDOFOPT {
            break;
        }
        let padded = pad4(len);
        if 4 + padded > area.len() {
            return Err(PcapError::MalformedBlock { offset, reason: format!("option {code} overruns block") });
        }
        options.push(PcapngOption { code, value: area[4..4 + len].to_vec() });
        area = &area[4 + padded..];
    }
    Ok(options)
}

/// Opens a PCAPNG stream; packets are produced lazily by the returned reader.
pub fn read_pcapng<R: Read>(input: R) -> Result<PcapngReader<R>> {
    PcapngReader::new(input)
}

/// Streaming writer emitting one SHB, one IDB and then one EPB per packet.
pub struct PcapngWriter<W: Write> {
    sink: W,
    link_type: u32,
    written: u64,
    scratch: Vec<u8>,
}

impl<W: Write> PcapngWriter<W> {
    pub fn new(mut sink: W, meta: CaptureMeta) -> Result<Self> {
        let mut head = Vec::with_capacity((SHB_LEN + IDB_LEN) as usize);
        head.extend_from_slice(&BLOCK_TYPE_SHB.to_le_bytes());
        head.extend_from_slice(&SHB_LEN.to_le_bytes());
        head.extend_from_slice(&BYTE_ORDER_MAGIC.to_le_bytes());
        head.extend_from_slice(&1u16.to_le_bytes());
        head.extend_from_slice(&0u16.to_le_bytes());
        head.extend_from_slice(&(-1i64).to_le_bytes());
        head.extend_from_slice(&SHB_LEN.to_le_bytes());

        head.extend_from_slice(&BLOCK_TYPE_IDB.to_le_bytes());
        head.extend_from_slice(&IDB_LEN.to_le_bytes());
        head.extend_from_slice(&(meta.link_type as u16).to_le_bytes());
        head.extend_from_slice(&0u16.to_le_bytes());
        head.extend_from_slice(&SNAPLEN_CAP.to_le_bytes());
        head.extend_from_slice(&IDB_LEN.to_le_bytes());
        sink.write_all(&head).map_err(PcapError::SinkFailure)?;
        Ok(PcapngWriter { sink, link_type: meta.link_type, written: head.len() as u64, scratch: Vec::new() })
    }

    /// Appends one Enhanced Packet Block. A comment becomes
    /// `[opt_comment, opt_endofopt]`; no comment means no options area.
    pub fn write_packet(&mut self, record: &RawPacketRecord, comment: Option<&str>) -> Result<()> {
        if record.link_type != self.link_type {
            return Err(PcapError::LinkTypeMismatch { expected: self.link_type, found: record.link_type });
        }
        if let Some(text) = comment {
            if text.len() > u16::MAX as usize {
                return Err(PcapError::CommentTooLong { length: text.len() });
            }
        }
        let caplen = record.data.len();
        let opts_len = comment.map_or(0, |c| 4 + pad4(c.len()) + 4);
        let total = EPB_FIXED_LEN + pad4(caplen) + opts_len;
        let ts = record.timestamp_us;

        let buf = &mut self.scratch;
        buf.clear();
        buf.extend_from_slice(&BLOCK_TYPE_EPB.to_le_bytes());
        buf.extend_from_slice(&(total as u32).to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        buf.extend_from_slice(&((ts >> 32) as u32).to_le_bytes());
        buf.extend_from_slice(&(ts as u32).to_le_bytes());
        buf.extend_from_slice(&(caplen as u32).to_le_bytes());
        buf.extend_from_slice(&record.original_length.to_le_bytes());
        buf.extend_from_slice(&record.data);
        buf.resize(buf.len() + pad4(caplen) - caplen, 0);
        if let Some(text) = comment {
            buf.extend_from_slice(&OPT_COMMENT.to_le_bytes());
            buf.extend_from_slice(&(text.len() as u16).to_le_bytes());
            buf.extend_from_slice(text.as_bytes());
            buf.resize(buf.len() + pad4(text.len()) - text.len(), 0);
            buf.extend_from_slice(&[0u8; 4]);
        }
        buf.extend_from_slice(&(total as u32).to_le_bytes());
        debug_assert_eq!(buf.len(), total);
        self.sink.write_all(buf).map_err(PcapError::SinkFailure)?;
        self.written += total as u64;
        Ok(())
    }

    pub fn bytes_written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<u64> {
        self.sink.flush().map_err(PcapError::SinkFailure)?;
        Ok(self.written)
    }
}

/// Writes a complete PCAPNG file and returns its size in bytes.
pub fn write_pcapng<'a, W, I>(output: W, meta: CaptureMeta, entries: I) -> Result<u64>
where
    W: Write,
    I: IntoIterator<Item = (&'a RawPacketRecord, Option<&'a str>)>,
{
    let mut writer = PcapngWriter::new(output, meta)?;
    for (record, comment) in entries {
        writer.write_packet(record, comment)?;
    }
    writer.finish()
}
