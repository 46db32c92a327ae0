use std::io::{Read, Write};

use super::{
    read_exact_at, read_exact_or_eof, ByteOrder, CaptureMeta, PcapError, RawPacketRecord, Result,
    MICROS_PER_SEC, SNAPLEN_CAP,
};

const MAGIC_MICROS: u32 = 0xA1B2_C3D4;
const MAGIC_NANOS: u32 = 0xA1B2_3C4D;

pub const PCAP_HEADER_LEN: usize = 24;
pub const PCAP_RECORD_HEADER_LEN: usize = 16;

pub(crate) fn is_pcap_magic(magic: u32) -> bool {
    magic == MAGIC_MICROS || magic == MAGIC_NANOS
}

/// Streaming reader for classic PCAP files.
pub struct PcapReader<R> {
    input: R,
    meta: CaptureMeta,
    nanos: bool,
    offset: u64,
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut header = [0u8; PCAP_HEADER_LEN];
        read_exact_at(&mut input, &mut header, 0)?;
        let magic_bytes = [header[0], header[1], header[2], header[3]];
        let le = u32::from_le_bytes(magic_bytes);
        let be = u32::from_be_bytes(magic_bytes);
        let (byte_order, magic) = if is_pcap_magic(le) {
            (ByteOrder::Little, le)
        } else if is_pcap_magic(be) {
            (ByteOrder::Big, be)
        } else {
            return Err(PcapError::BadMagic { magic: le, expected: "PCAP" });
        };
        let link_type = byte_order.u32([header[20], header[21], header[22], header[23]]);
        Ok(PcapReader {
            input,
            meta: CaptureMeta { link_type, timestamp_resolution: MICROS_PER_SEC, byte_order },
            nanos: magic == MAGIC_NANOS,
            offset: PCAP_HEADER_LEN as u64,
        })
    }

    pub fn meta(&self) -> CaptureMeta {
        self.meta
    }

    /// Returns `Ok(None)` at a clean end of file.
    pub fn next_record(&mut self) -> Result<Option<RawPacketRecord>> {
        let start = self.offset;
        let mut hdr = [0u8; PCAP_RECORD_HEADER_LEN];
        if !read_exact_or_eof(&mut self.input, &mut hdr, start)? {
            return Ok(None);
        }
        let bo = self.meta.byte_order;
        let field = |i: usize| bo.u32([hdr[i], hdr[i + 1], hdr[i + 2], hdr[i + 3]]);
        let (secs, frac, caplen, origlen) = (field(0), field(4), field(8), field(12));
        if caplen > SNAPLEN_CAP {
            return Err(PcapError::OversizedRecord { offset: start, length: caplen });
        }
        let mut data = vec![0u8; caplen as usize];
        read_exact_at(&mut self.input, &mut data, start)?;
        self.offset = start + PCAP_RECORD_HEADER_LEN as u64 + caplen as u64;
        let micros = if self.nanos { frac as u64 / 1000 } else { frac as u64 };
        Ok(Some(RawPacketRecord {
            timestamp_us: secs as u64 * MICROS_PER_SEC + micros,
            original_length: origlen.max(caplen),
            link_type: self.meta.link_type,
            data,
        }))
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<RawPacketRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

/// Opens a PCAP stream. Records are produced lazily by the returned reader.
pub fn read_pcap<R: Read>(input: R) -> Result<PcapReader<R>> {
    PcapReader::new(input)
}

/// Streaming writer for little-endian microsecond PCAP files.
pub struct PcapWriter<W: Write> {
    sink: W,
    link_type: u32,
    written: u64,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut sink: W, meta: CaptureMeta) -> Result<Self> {
        let mut header = [0u8; PCAP_HEADER_LEN];
        header[0..4].copy_from_slice(&MAGIC_MICROS.to_le_bytes());
        header[4..6].copy_from_slice(&2u16.to_le_bytes());
        header[6..8].copy_from_slice(&4u16.to_le_bytes());
        // thiszone and sigfigs stay zero
        header[16..20].copy_from_slice(&SNAPLEN_CAP.to_le_bytes());
        header[20..24].copy_from_slice(&meta.link_type.to_le_bytes());
        sink.write_all(&header).map_err(PcapError::SinkFailure)?;
        Ok(PcapWriter { sink, link_type: meta.link_type, written: PCAP_HEADER_LEN as u64 })
    }

    /// Continues an existing file whose global header is already on disk.
    pub(crate) fn append(sink: W, link_type: u32) -> Self {
        PcapWriter { sink, link_type, written: 0 }
    }

    pub fn write_record(&mut self, record: &RawPacketRecord) -> Result<()> {
        if record.link_type != self.link_type {
            return Err(PcapError::LinkTypeMismatch { expected: self.link_type, found: record.link_type });
        }
        let (secs, micros) = record.split_timestamp();
        let mut hdr = [0u8; PCAP_RECORD_HEADER_LEN];
        hdr[0..4].copy_from_slice(&secs.to_le_bytes());
        hdr[4..8].copy_from_slice(&micros.to_le_bytes());
        hdr[8..12].copy_from_slice(&record.captured_length().to_le_bytes());
        hdr[12..16].copy_from_slice(&record.original_length.to_le_bytes());
        self.sink.write_all(&hdr).map_err(PcapError::SinkFailure)?;
        self.sink.write_all(&record.data).map_err(PcapError::SinkFailure)?;
        self.written += (PCAP_RECORD_HEADER_LEN + record.data.len()) as u64;
        Ok(())
    }

    pub fn bytes_written(&self) -> u64 {
        self.written
    }

    /// Flushes the sink and returns the total bytes written.
    pub fn finish(mut self) -> Result<u64> {
        self.sink.flush().map_err(PcapError::SinkFailure)?;
        Ok(self.written)
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

/// Writes a complete PCAP file and returns its size in bytes.
pub fn write_pcap<'a, W, I>(output: W, meta: CaptureMeta, records: I) -> Result<u64>
where
    W: Write,
    I: IntoIterator<Item = &'a RawPacketRecord>,
{
    let mut writer = PcapWriter::new(output, meta)?;
    for record in records {
        writer.write_record(record)?;
    }
    writer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_built_file(big_endian: bool) -> Vec<u8> {
        let w32 = |v: u32| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        let w16 = |v: u16| if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        let mut f = Vec::new();
        f.extend_from_slice(&w32(0xA1B2C3D4));
        f.extend_from_slice(&w16(2));
        f.extend_from_slice(&w16(4));
        f.extend_from_slice(&[0; 8]);
        f.extend_from_slice(&w32(65535));
        f.extend_from_slice(&w32(1));
        f.extend_from_slice(&w32(1000));
        f.extend_from_slice(&w32(1));
        f.extend_from_slice(&w32(60));
        f.extend_from_slice(&w32(60));
        f.extend((0..60u8).map(|i| i.wrapping_mul(7)));
        f
    }

    #[test]
    fn empty_capture_has_meta_only() {
        let mut f = hand_built_file(false);
        f.truncate(24);
        let reader = read_pcap(&f[..]).unwrap();
        assert_eq!(reader.meta().link_type, 1);
        assert_eq!(reader.count(), 0);
    }

    #[test]
    fn one_frame_hand_assembled() {
        let f = hand_built_file(false);
        assert_eq!(f.len(), 24 + 16 + 60);
        let recs: Vec<_> = read_pcap(&f[..]).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].timestamp_us, 1_000_000_001);
        assert_eq!(recs[0].captured_length(), 60);
        assert_eq!(recs[0].data[59], 59u8.wrapping_mul(7));
    }

    #[test]
    fn big_endian_twin_reads_identically() {
        let le: Vec<_> = read_pcap(&hand_built_file(false)[..]).unwrap().collect::<Result<_>>().unwrap();
        let be_reader = read_pcap(std::io::Cursor::new(hand_built_file(true))).unwrap();
        assert_eq!(be_reader.meta().byte_order, ByteOrder::Big);
        let be: Vec<_> = be_reader.collect::<Result<_>>().unwrap();
        assert_eq!(le, be);
    }

    #[test]
    fn nanosecond_magic_truncates() {
        let mut f = hand_built_file(false);
        f[0..4].copy_from_slice(&MAGIC_NANOS.to_le_bytes());
        f[28..32].copy_from_slice(&1_999u32.to_le_bytes());
        let rec = read_pcap(&f[..]).unwrap().next().unwrap().unwrap();
        assert_eq!(rec.timestamp_us, 1_000_000_001);
    }

    #[test]
    fn truncated_record_reports_offset() {
        let mut f = hand_built_file(false);
        f.truncate(24 + 16 + 30);
        match read_pcap(&f[..]).unwrap().next().unwrap() {
            Err(PcapError::TruncatedRecord { offset }) => assert_eq!(offset, 24),
            other => panic!("unexpected {other:?}"),
        }
        f.truncate(30);
        assert!(matches!(read_pcap(&f[..]).unwrap().next(), Some(Err(PcapError::TruncatedRecord { offset: 24 }))));
    }

    #[test]
    fn oversized_and_bad_magic() {
        let mut f = hand_built_file(false);
        f[32..36].copy_from_slice(&(SNAPLEN_CAP + 1).to_le_bytes());
        assert!(matches!(read_pcap(&f[..]).unwrap().next(), Some(Err(PcapError::OversizedRecord { .. }))));
        f[0] = 0;
        assert!(matches!(read_pcap(&f[..]), Err(PcapError::BadMagic { .. })));
    }

    #[test]
    fn writer_sizes() {
        let mut out = Vec::new();
        assert_eq!(write_pcap(&mut out, CaptureMeta::default(), []).unwrap(), 24);
        assert_eq!(out.len(), 24);

        let mut out = Vec::new();
        let rec = RawPacketRecord::new(0, 1, vec![0xAB]);
        assert_eq!(write_pcap(&mut out, CaptureMeta::default(), [&rec]).unwrap(), 41);
        assert_eq!(out.len(), 41);
    }

    #[test]
    fn rewrite_preserves_packet_region() {
        let f = hand_built_file(false);
        let recs: Vec<_> = read_pcap(&f[..]).unwrap().collect::<Result<_>>().unwrap();
        let mut out = Vec::new();
        write_pcap(&mut out, CaptureMeta::default(), &recs).unwrap();
        assert_eq!(out[24..], f[24..]);
    }
}
