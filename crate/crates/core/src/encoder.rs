//! The labeling pass: read packets, find the metadata record whose filter
//! they match, and write them to a PCAPNG with `<sampleID>,<metadata>` attached.
//!
//! Two modes exist. Directory mode labels whole files through `FILE:` filters.
//! Stream mode (a single capture, or a paced replay standing in for a live
//! interface) evaluates predicate/window filters packet by packet, starting
//! each search at the filter that matched last.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use log::warn;

use crate::decode::decode_headers;
use crate::filter::{match_filter, FilterAst};
use crate::metadata::{LabelSet, SampleId};
use crate::pcap_io::{open_capture, CaptureMeta, CaptureReader, PcapError, PcapngWriter, RawPacketRecord};

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("line {line}: labeled file `{path}` does not exist")]
    MissingLabeledFile { line: usize, path: String },
    #[error("line {line}: {mode} mode does not accept filter `{filter}`")]
    MixedFilterTypes { line: usize, mode: &'static str, filter: String },
    #[error("lines {first_line} and {line} label the same file `{}`", path.display())]
    DuplicateFile { line: usize, first_line: usize, path: PathBuf },
    #[error("{} is not a usable packet source for this mode", .0.display())]
    UnsupportedSource(PathBuf),
    #[error("{}: {source}", path.display())]
    Capture { path: PathBuf, source: PcapError },
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where packets come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PacketSource {
    /// A directory of captures labeled with `FILE:` filters.
    Directory(PathBuf),
    /// One PCAP or PCAPNG file.
    SinglePcap(PathBuf),
    /// A capture replayed at `rate_mbps` (unpaced when `None`), standing in for
    /// a live interface.
    Stream { path: PathBuf, rate_mbps: Option<f64> },
}

/// Counters for one encoding run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncodeReport {
    pub packets_read: u64,
    pub packets_matched: u64,
    pub packets_dropped_unmatched: u64,
    /// Distinct sampleIDs that labeled at least one packet.
    pub samples_seen: u64,
    pub duration: Duration,
    pub bytes_written: u64,
    /// Total filter evaluations performed by the rotated search.
    pub filter_probes: u64,
}

impl EncodeReport {
    /// Mean filter evaluations per packet read.
    pub fn mean_probes(&self) -> f64 {
        if self.packets_read == 0 {
            0.0
        } else {
            self.filter_probes as f64 / self.packets_read as f64
        }
    }

    /// The machine-readable one-line summary.
    pub fn summary_line(&self) -> String {
        format!(
            "read={} matched={} dropped={} samples={} seconds={:.6}",
            self.packets_read,
            self.packets_matched,
            self.packets_dropped_unmatched,
            self.samples_seen,
            self.duration.as_secs_f64()
        )
    }
}

/// Pull-based packet producer.
pub trait PacketStream {
    fn meta(&self) -> CaptureMeta;
    fn next_record(&mut self) -> Result<Option<RawPacketRecord>, PcapError>;
}

impl<R: std::io::Read> PacketStream for CaptureReader<R> {
    fn meta(&self) -> CaptureMeta {
        CaptureReader::meta(self)
    }

    fn next_record(&mut self) -> Result<Option<RawPacketRecord>, PcapError> {
        Ok(self.next_packet()?.map(|p| p.record))
    }
}

/// Wraps a stream and releases packets no faster than a target bit rate.
pub struct PacedReplay<S> {
    inner: S,
    bits_per_sec: f64,
    started: Option<Instant>,
    bits_sent: f64,
}

impl<S: PacketStream> PacedReplay<S> {
    pub fn new(inner: S, rate_mbps: f64) -> Self {
        PacedReplay { inner, bits_per_sec: rate_mbps * 1e6, started: None, bits_sent: 0.0 }
    }
}

impl<S: PacketStream> PacketStream for PacedReplay<S> {
    fn meta(&self) -> CaptureMeta {
        self.inner.meta()
    }

    fn next_record(&mut self) -> Result<Option<RawPacketRecord>, PcapError> {
        let started = *self.started.get_or_insert_with(Instant::now);
        let record = self.inner.next_record()?;
        if let Some(r) = &record {
            self.bits_sent += r.data.len() as f64 * 8.0;
            let due = Duration::from_secs_f64(self.bits_sent / self.bits_per_sec);
            let elapsed = started.elapsed();
            if due > elapsed + Duration::from_millis(1) {
                thread::sleep(due - elapsed);
            }
        }
        Ok(record)
    }
}

/// Rotated first-match search: probes `last_hit`, `last_hit + 1`, ..., wrapping once.
pub fn search_match(filters: &[FilterAst], view: &crate::HeaderView, ts_us: u64, last_hit: usize) -> Option<usize> {
    search_match_counted(filters, view, ts_us, last_hit).0
}

/// [`search_match`] that also returns the number of filters evaluated.
pub fn search_match_counted(
    filters: &[FilterAst],
    view: &crate::HeaderView,
    ts_us: u64,
    last_hit: usize,
) -> (Option<usize>, usize) {
    let n = filters.len();
    if n == 0 {
        return (None, 0);
    }
    let start = last_hit % n;
    for step in 0..n {
        let idx = (start + step) % n;
        if match_filter(&filters[idx], view, ts_us) {
            return (Some(idx), step + 1);
        }
    }
    (None, n)
}

fn create_output(out: &Path) -> Result<BufWriter<File>, EncodeError> {
    Ok(BufWriter::with_capacity(1 << 20, File::create(out)?))
}

fn open(path: &Path) -> Result<CaptureReader<BufReader<File>>, EncodeError> {
    open_capture(path).map_err(|source| EncodeError::Capture { path: path.to_path_buf(), source })
}

fn resolve_labeled_file(dir: &Path, path: &str) -> Option<PathBuf> {
    let given = Path::new(path);
    let candidates = if given.is_absolute() { vec![given.to_path_buf()] } else { vec![dir.join(given), given.to_path_buf()] };
    candidates.into_iter().find(|p| p.is_file()).and_then(|p| p.canonicalize().ok())
}

/// Labels every packet of each `FILE:` record's capture with that record's
/// comment, in label order. Other files in `dir` are read and counted as
/// unmatched; files that are not captures are skipped with a warning.
pub fn encode_directory(dir: &Path, labels: &LabelSet, out: &Path) -> Result<EncodeReport, EncodeError> {
    let started = Instant::now();
    let mut resolved = Vec::with_capacity(labels.len());
    let mut seen: std::collections::HashMap<PathBuf, usize> = std::collections::HashMap::new();
    for entry in labels.iter() {
        let line = entry.record.source_line;
        let FilterAst::File(path) = &entry.record.filter else {
            return Err(EncodeError::MixedFilterTypes { line, mode: "directory", filter: entry.record.filter.to_string() });
        };
        let canonical = resolve_labeled_file(dir, path).ok_or_else(|| EncodeError::MissingLabeledFile { line, path: path.clone() })?;
        if let Some(&first_line) = seen.get(&canonical) {
            return Err(EncodeError::DuplicateFile { line, first_line, path: canonical });
        }
        seen.insert(canonical.clone(), line);
        resolved.push((canonical, entry));
    }

    let link_type = match resolved.first() {
        Some((path, _)) => open(path)?.meta().link_type,
        None => CaptureMeta::default().link_type,
    };
    let mut writer = PcapngWriter::new(create_output(out)?, CaptureMeta::new(link_type))?;
    let mut report = EncodeReport::default();
    let mut samples = HashSet::new();

    for (path, entry) in &resolved {
        let mut reader = open(path)?;
        while let Some(record) = reader.next_record().map_err(|source| EncodeError::Capture { path: path.clone(), source })? {
            writer.write_packet(&record, Some(&entry.comment))?;
            report.packets_read += 1;
            report.packets_matched += 1;
            samples.insert(entry.sample_id);
        }
    }

    let out_canonical = out.canonicalize().ok();
    let mut unlabeled: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .filter_map(|p| p.canonicalize().ok())
        .filter(|p| !seen.contains_key(p) && Some(p) != out_canonical.as_ref())
        .collect();
    unlabeled.sort();
    for path in unlabeled {
        let mut reader = match open_capture(&path) {
            Ok(r) => r,
            Err(err) => {
                warn!("skipping {}: {err}", path.display());
                continue;
            }
        };
        while reader.next_record().map_err(|source| EncodeError::Capture { path: path.clone(), source })?.is_some() {
            report.packets_read += 1;
            report.packets_dropped_unmatched += 1;
        }
    }

    report.bytes_written = writer.finish()?;
    report.samples_seen = samples.len() as u64;
    report.duration = started.elapsed();
    Ok(report)
}

/// Stream-mode encoding into any sink.
pub fn encode_packets<S, W>(source: &mut S, labels: &LabelSet, sink: W) -> Result<EncodeReport, EncodeError>
where
    S: PacketStream + ?Sized,
    W: Write,
{
    let started = Instant::now();
    let filters: Vec<FilterAst> = labels
        .iter()
        .map(|e| match &e.record.filter {
            FilterAst::File(_) => Err(EncodeError::MixedFilterTypes {
                line: e.record.source_line,
                mode: "stream",
                filter: e.record.filter.to_string(),
            }),
            f => Ok(f.clone()),
        })
        .collect::<Result<_, _>>()?;
    let comments: Vec<&str> = labels.iter().map(|e| e.comment.as_str()).collect();
    let ids: Vec<SampleId> = labels.iter().map(|e| e.sample_id).collect();

    let meta = source.meta();
    let mut writer = PcapngWriter::new(sink, CaptureMeta::new(meta.link_type))?;
    let mut report = EncodeReport::default();
    let mut samples = HashSet::new();
    let mut last_hit = 0usize;
    while let Some(record) = source.next_record()? {
        report.packets_read += 1;
        let view = decode_headers(&record.data, record.link_type);
        let (hit, probes) = search_match_counted(&filters, &view, record.timestamp_us, last_hit);
        report.filter_probes += probes as u64;
        match hit {
            Some(idx) => {
                last_hit = idx;
                writer.write_packet(&record, Some(comments[idx]))?;
                report.packets_matched += 1;
                samples.insert(ids[idx]);
            }
            None => report.packets_dropped_unmatched += 1,
        }
    }
    report.bytes_written = writer.finish()?;
    report.samples_seen = samples.len() as u64;
    report.duration = started.elapsed();
    Ok(report)
}

/// Labels a single capture or a paced replay, writing a PCAPNG at `out` in
/// input order. Unmatched packets are dropped.
pub fn encode_stream(source: &PacketSource, labels: &LabelSet, out: &Path) -> Result<EncodeReport, EncodeError> {
    match source {
        PacketSource::Directory(p) => Err(EncodeError::UnsupportedSource(p.clone())),
        PacketSource::SinglePcap(path) => {
            let mut reader = open(path)?;
            encode_packets(&mut reader, labels, create_output(out)?)
        }
        PacketSource::Stream { path, rate_mbps } => {
            let reader = open(path)?;
            match rate_mbps {
                Some(rate) if *rate > 0.0 => {
                    encode_packets(&mut PacedReplay::new(reader, *rate), labels, create_output(out)?)
                }
                _ => {
                    let mut reader = reader;
                    encode_packets(&mut reader, labels, create_output(out)?)
                }
            }
        }
    }
}
