//! Structural checker for PCAPNG bytes, independent of [`PcapngReader`](super::PcapngReader).
//!
//! Walks the raw block chain and verifies block magic, 32-bit alignment,
//! matching leading/trailing lengths, packet framing inside EPBs and the
//! TLV framing of every options area.

use std::fmt;

const SHB: u32 = 0x0A0D_0D0A;
const IDB: u32 = 0x0000_0001;
const EPB: u32 = 0x0000_0006;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub blocks: usize,
    pub interfaces: usize,
    pub packets: usize,
    pub comments: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub offset: usize,
    pub reason: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "offset {}: {}", self.offset, self.reason)
    }
}

impl std::error::Error for ValidationError {}

fn le32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn le16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes(b[at..at + 2].try_into().unwrap())
}

/// Validates a whole little-endian PCAPNG file held in memory.
pub fn validate_pcapng(bytes: &[u8]) -> Result<ValidationReport, ValidationError> {
    let fail = |offset: usize, reason: String| Err(ValidationError { offset, reason });
    let mut report = ValidationReport::default();
    let mut at = 0usize;
    while at < bytes.len() {
        if bytes.len() - at < 12 {
            return fail(at, format!("{} trailing bytes cannot hold a block", bytes.len() - at));
        }
        let block_type = le32(bytes, at);
        let total = le32(bytes, at + 4) as usize;
        if at == 0 && block_type != SHB {
            return fail(0, format!("first block type {block_type:#010x} is not a section header"));
        }
        if total < 12 || !total.is_multiple_of(4) {
            return fail(at, format!("block length {total} not a multiple of 4 or too short"));
        }
        if at + total > bytes.len() {
            return fail(at, format!("block length {total} runs past end of file"));
        }
        let trailing = le32(bytes, at + total - 4) as usize;
        if trailing != total {
            return fail(at, format!("leading length {total} != trailing length {trailing}"));
        }
        let body = &bytes[at + 8..at + total - 4];
        match block_type {
            SHB => {
                if body.len() < 16 || le32(body, 0) != 0x1A2B_3C4D {
                    return fail(at, "section header lacks little-endian byte-order magic".into());
                }
                check_options(&body[16..], at).map(|_| ())?;
            }
            IDB => {
                if body.len() < 8 {
                    return fail(at, "interface description too short".into());
                }
                check_options(&body[8..], at)?;
                report.interfaces += 1;
            }
            EPB => {
                if body.len() < 20 {
                    return fail(at, "enhanced packet block too short".into());
                }
                if le32(body, 0) as usize >= report.interfaces {
                    return fail(at, "packet references an undeclared interface".into());
                }
                let caplen = le32(body, 12) as usize;
                let origlen = le32(body, 16) as usize;
                if caplen > origlen {
                    return fail(at, format!("captured length {caplen} exceeds original length {origlen}"));
                }
                let padded = caplen.next_multiple_of(4);
                if 20 + padded > body.len() {
                    return fail(at, format!("captured length {caplen} overruns block"));
                }
                if body[20 + caplen..20 + padded].iter().any(|&b| b != 0) {
                    return fail(at, "non-zero packet padding".into());
                }
                report.comments += check_options(&body[20 + padded..], at)?;
                report.packets += 1;
            }
            _ => {}
        }
        report.blocks += 1;
        at += total;
    }
    if report.blocks == 0 {
        return fail(0, "empty file".into());
    }
    Ok(report)
}

/// Checks that the option TLVs exactly tile `area`, terminated by
/// `opt_endofopt` when non-empty. Returns the number of comment options.
fn check_options(area: &[u8], block: usize) -> Result<usize, ValidationError> {
    let mut comments = 0;
    let mut at = 0;
    if area.is_empty() {
        return Ok(0);
    }
    loop {
        if area.len() - at < 4 {
            return Err(ValidationError { offset: block, reason: "options area not terminated".into() });
        }
        let code = le16(area, at);
        let len = le16(area, at + 2) as usize;
        if code == 0 {
            if len != 0 || at + 4 != area.len() {
                return Err(ValidationError { offset: block, reason: "bytes after opt_endofopt".into() });
            }
            return Ok(comments);
        }
        let padded = len.next_multiple_of(4);
        if at + 4 + padded > area.len() {
            return Err(ValidationError { offset: block, reason: format!("option {code} overruns block") });
        }
        let value = &area[at + 4..at + 4 + len];
        if area[at + 4 + len..at + 4 + padded].iter().any(|&b| b != 0) {
            return Err(ValidationError { offset: block, reason: format!("option {code} has non-zero padding") });
        }
        if code == 1 {
            if std::str::from_utf8(value).is_err() {
                return Err(ValidationError { offset: block, reason: "comment is not UTF-8".into() });
            }
            comments += 1;
        }
        at += 4 + padded;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcap_io::{write_pcapng, CaptureMeta, RawPacketRecord};

    #[test]
    fn accepts_writer_output_and_flags_corruption() {
        let recs: Vec<_> = (0..5).map(|i| RawPacketRecord::new(i, 1, vec![i as u8; i as usize * 3])).collect();
        let comments = ["0,a", "1,bb", "2,ccc", "3,dddd", "4,eeeee"];
        let mut out = Vec::new();
        write_pcapng(&mut out, CaptureMeta::default(), recs.iter().zip(comments.iter().map(|c| Some(*c)))).unwrap();
        let report = validate_pcapng(&out).unwrap();
        assert_eq!(report, ValidationReport { blocks: 7, interfaces: 1, packets: 5, comments: 5 });

        let mut bad = out.clone();
        let last = bad.len() - 1;
        bad[last] = 0xFF;
        assert!(validate_pcapng(&bad).is_err());

        let mut bad = out.clone();
        bad.truncate(out.len() - 2);
        assert!(validate_pcapng(&bad).is_err());
    }
}
