//! External-merge sort of an encoded PCAPNG by `(sampleID, timestamp, input index)`.
//!
//! Packets are buffered until the memory budget is reached, sorted, and spilled
//! to a private temporary run file. Runs are then merged k ways (cascading
//! when there are more runs than the merge fan-in). Inputs that fit in the
//! budget never touch the disk.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use log::debug;

use crate::metadata::{parse_comment_borrowed, SampleId};
use crate::pcap_io::{read_pcapng, CaptureMeta, PcapError, PcapngWriter, RawPacketRecord, OPT_COMMENT};

/// Default buffer budget: 512 MiB.
pub const DEFAULT_MEMORY_BUDGET: usize = 512 << 20;

/// Environment variable overriding the budget, in bytes.
pub const MEM_BUDGET_ENV: &str = "PCAPML_MEM_BUDGET";

const MERGE_FAN_IN: usize = 64;
// rough per-entry bookkeeping cost on top of packet and comment bytes
const ENTRY_OVERHEAD: usize = 96;

#[derive(Debug, thiserror::Error)]
pub enum SortError {
    #[error("packet block at byte {offset}: comment `{comment}` is not `<sampleID>,<metadata>`")]
    MalformedComment { offset: u64, comment: String },
    #[error("packet block at byte {offset} has no comment")]
    MissingComment { offset: u64 },
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SortReport {
    pub packets: u64,
    /// Sorted runs spilled to disk; zero when the input fit in memory.
    pub runs: usize,
    /// Intermediate merge passes needed beyond the final one.
    pub cascades: usize,
    pub bytes_written: u64,
}

/// Budget from [`MEM_BUDGET_ENV`] when set and parseable, else the default.
pub fn memory_budget_from_env() -> usize {
    std::env::var(MEM_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&b| b > 0)
        .unwrap_or(DEFAULT_MEMORY_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    sid: SampleId,
    ts: u64,
    index: u64,
    record: RawPacketRecord,
    comment: String,
}

impl Entry {
    fn key(&self) -> (SampleId, u64, u64) {
        (self.sid, self.ts, self.index)
    }

    fn footprint(&self) -> usize {
        self.record.data.len() + self.comment.len() + ENTRY_OVERHEAD
    }

    fn write_to<W: Write>(&self, out: &mut W) -> io::Result<()> {
        out.write_all(&self.sid.0.to_le_bytes())?;
        out.write_all(&self.ts.to_le_bytes())?;
        out.write_all(&self.index.to_le_bytes())?;
        out.write_all(&self.record.original_length.to_le_bytes())?;
        out.write_all(&self.record.link_type.to_le_bytes())?;
        out.write_all(&(self.comment.len() as u32).to_le_bytes())?;
        out.write_all(&(self.record.data.len() as u32).to_le_bytes())?;
        out.write_all(self.comment.as_bytes())?;
        out.write_all(&self.record.data)
    }

    fn read_from<R: Read>(input: &mut R) -> io::Result<Option<Entry>> {
        let mut head = [0u8; 40];
        match input.read_exact(&mut head[..8]) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e),
        }
        input.read_exact(&mut head[8..])?;
        let u64_at = |at: usize| u64::from_le_bytes(head[at..at + 8].try_into().unwrap());
        let u32_at = |at: usize| u32::from_le_bytes(head[at..at + 4].try_into().unwrap());
        let mut comment = vec![0u8; u32_at(32) as usize];
        input.read_exact(&mut comment)?;
        let mut data = vec![0u8; u32_at(36) as usize];
        input.read_exact(&mut data)?;
        let comment = String::from_utf8(comment).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let ts = u64_at(8);
        Ok(Some(Entry {
            sid: SampleId(u64_at(0)),
            ts,
            index: u64_at(16),
            record: RawPacketRecord { timestamp_us: ts, original_length: u32_at(24), link_type: u32_at(28), data },
            comment,
        }))
    }
}

struct Run {
    reader: BufReader<File>,
}

impl Run {
    fn spill(entries: &[Entry]) -> io::Result<Run> {
        let mut file = BufWriter::new(tempfile::tempfile()?);
        for e in entries {
            e.write_to(&mut file)?;
        }
        let mut file = file.into_inner().map_err(|e| e.into_error())?;
        file.seek(SeekFrom::Start(0))?;
        Ok(Run { reader: BufReader::new(file) })
    }

    fn next(&mut self) -> io::Result<Option<Entry>> {
        Entry::read_from(&mut self.reader)
    }
}

/// Merges runs in key order, feeding each entry to `emit`.
fn merge_runs(runs: &mut [Run], mut emit: impl FnMut(Entry) -> Result<(), SortError>) -> Result<(), SortError> {
    let mut heads: Vec<Option<Entry>> = Vec::with_capacity(runs.len());
    let mut heap = BinaryHeap::with_capacity(runs.len());
    for (i, run) in runs.iter_mut().enumerate() {
        let head = run.next()?;
        if let Some(e) = &head {
            heap.push(Reverse((e.key(), i)));
        }
        heads.push(head);
    }
    while let Some(Reverse((_, i))) = heap.pop() {
        let entry = heads[i].take().expect("heap tracks live heads");
        if let Some(next) = runs[i].next()? {
            heap.push(Reverse((next.key(), i)));
            heads[i] = Some(next);
        }
        emit(entry)?;
    }
    Ok(())
}

/// Sorts with the budget from the environment (or the 512 MiB default).
pub fn sort_pcapng(input: &Path, output: &Path) -> Result<SortReport, SortError> {
    sort_pcapng_with_budget(input, output, memory_budget_from_env())
}

pub fn sort_pcapng_with_budget(input: &Path, output: &Path, budget: usize) -> Result<SortReport, SortError> {
    let reader = BufReader::with_capacity(1 << 20, File::open(input)?);
    let sink = BufWriter::with_capacity(1 << 20, File::create(output)?);
    sort_stream(reader, sink, budget)
}

/// Sorts an encoded PCAPNG stream into `sink`, holding at most about `budget`
/// bytes of packets in memory at a time.
pub fn sort_stream<R: Read, W: Write>(input: R, sink: W, budget: usize) -> Result<SortReport, SortError> {
    let mut reader = read_pcapng(input)?;
    let mut report = SortReport::default();
    let mut runs = Vec::new();
    let mut buffer: Vec<Entry> = Vec::new();
    let mut buffered = 0usize;
    let mut meta: Option<CaptureMeta> = None;

    while let Some((record, options)) = reader.next_entry()? {
        let offset = reader.entry_offset();
        if meta.is_none() {
            meta = Some(CaptureMeta::new(reader.meta().link_type));
        }
        let value = options
            .into_iter()
            .find(|o| o.code == OPT_COMMENT)
            .ok_or(SortError::MissingComment { offset })?
            .value;
        let comment = String::from_utf8(value).map_err(|e| SortError::MalformedComment {
            offset,
            comment: String::from_utf8_lossy(e.as_bytes()).into_owned(),
        })?;
        let sid = parse_comment_borrowed(&comment)
            .map_err(|m| SortError::MalformedComment { offset, comment: m.0 })?
            .0;
        let entry = Entry { sid, ts: record.timestamp_us, index: report.packets, record, comment };
        report.packets += 1;
        buffered += entry.footprint();
        buffer.push(entry);
        if buffered >= budget {
            buffer.sort_unstable_by_key(Entry::key);
            runs.push(Run::spill(&buffer)?);
            buffer.clear();
            buffered = 0;
        }
    }

    let meta = meta.unwrap_or_else(|| CaptureMeta::new(reader.meta().link_type));
    let mut writer = PcapngWriter::new(sink, meta)?;
    let mut write = |e: Entry| -> Result<(), SortError> { Ok(writer.write_packet(&e.record, Some(&e.comment))?) };
    buffer.sort_unstable_by_key(Entry::key);

    if runs.is_empty() {
        buffer.into_iter().try_for_each(&mut write)?;
    } else {
        if !buffer.is_empty() {
            runs.push(Run::spill(&buffer)?);
        }
        drop(buffer);
        report.runs = runs.len();
        while runs.len() > MERGE_FAN_IN {
            report.cascades += 1;
            let mut next = Vec::with_capacity(runs.len().div_ceil(MERGE_FAN_IN));
            let mut pending = runs.into_iter().peekable();
            while pending.peek().is_some() {
                let mut group: Vec<Run> = pending.by_ref().take(MERGE_FAN_IN).collect();
                let mut out = BufWriter::new(tempfile::tempfile()?);
                merge_runs(&mut group, |e| Ok(e.write_to(&mut out)?))?;
                let mut file = out.into_inner().map_err(|e| e.into_error())?;
                file.seek(SeekFrom::Start(0))?;
                next.push(Run { reader: BufReader::new(file) });
            }
            runs = next;
        }
        debug!("merging {} runs after {} cascades", runs.len(), report.cascades);
        merge_runs(&mut runs, &mut write)?;
    }
    report.bytes_written = writer.finish()?;
    Ok(report)
}
