//! Reverse mode: one plain PCAP per sample plus a `metadata.csv` manifest,
//! and stripping of comments for disk-overhead measurement.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;

use crate::metadata::{parse_comment_borrowed, SampleId};
use crate::pcap_io::{read_pcapng, CaptureMeta, PcapError, PcapWriter};

/// Name of the manifest written next to the split captures.
pub const MANIFEST_NAME: &str = "metadata.csv";
pub const MANIFEST_HEADER: &str = "pcap_file,sampleid,metadata";
/// Longest sanitized metadata kept in a file name.
pub const MAX_NAME_METADATA: usize = 128;
/// Output files held open at once; older ones are closed and later reopened for append.
pub const MAX_OPEN_FILES: usize = 128;

#[derive(Debug, thiserror::Error)]
pub enum SplitError {
    #[error("packet block at byte {offset}: comment `{comment}` is not `<sampleID>,<metadata>`")]
    MalformedComment { offset: u64, comment: String },
    #[error("packet block at byte {offset} has no comment")]
    MissingComment { offset: u64 },
    #[error("manifest line {line}: {reason}")]
    BadManifest { line: usize, reason: String },
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One written sample file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitEntry {
    pub path: PathBuf,
    pub sample_id: SampleId,
    pub metadata: String,
    pub packets: u64,
}

/// Replaces characters outside `[A-Za-z0-9._-]` with `_` and keeps at most 128 of them.
pub fn sanitize_metadata(metadata: &str) -> String {
    metadata
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .take(MAX_NAME_METADATA)
        .collect()
}

/// `<sid>-<sanitized>.pcap`.
pub fn sample_file_name(sid: SampleId, metadata: &str) -> String {
    format!("{sid}-{}.pcap", sanitize_metadata(metadata))
}

struct SampleState {
    path: PathBuf,
    metadata: String,
    link_type: u32,
    packets: u64,
    last_used: u64,
}

struct OpenFiles {
    writers: HashMap<SampleId, PcapWriter<BufWriter<File>>>,
    cap: usize,
}

impl OpenFiles {
    fn writer(
        &mut self,
        sid: SampleId,
        state: &SampleState,
        all: &HashMap<SampleId, SampleState>,
        fresh: bool,
    ) -> Result<&mut PcapWriter<BufWriter<File>>, SplitError> {
        if !self.writers.contains_key(&sid) {
            if self.writers.len() >= self.cap {
                let victim = *self
                    .writers
                    .keys()
                    .min_by_key(|k| all.get(k).map_or(0, |s| s.last_used))
                    .expect("cap is at least one");
                self.writers.remove(&victim).expect("victim is open").finish()?;
            }
            let writer = if fresh {
                PcapWriter::new(BufWriter::new(File::create(&state.path)?), CaptureMeta::new(state.link_type))?
            } else {
                let file = OpenOptions::new().append(true).open(&state.path)?;
                PcapWriter::append(BufWriter::new(file), state.link_type)
            };
            self.writers.insert(sid, writer);
        }
        Ok(self.writers.get_mut(&sid).expect("just inserted"))
    }
}

/// Writes one PCAP per sampleID into `out_dir` (created if missing) plus the
/// manifest. Input need not be sorted; packets keep their input order.
pub fn split_pcapng(input: &Path, out_dir: &Path) -> Result<Vec<SplitEntry>, SplitError> {
    split_pcapng_with_cap(input, out_dir, MAX_OPEN_FILES)
}

/// [`split_pcapng`] with a custom open-file cap.
pub fn split_pcapng_with_cap(input: &Path, out_dir: &Path, cap: usize) -> Result<Vec<SplitEntry>, SplitError> {
    fs::create_dir_all(out_dir)?;
    let mut reader = read_pcapng(BufReader::with_capacity(1 << 20, File::open(input)?))?;
    let mut samples: HashMap<SampleId, SampleState> = HashMap::new();
    let mut open = OpenFiles { writers: HashMap::new(), cap: cap.max(1) };
    let mut tick = 0u64;

    while let Some(packet) = reader.next_packet()? {
        let offset = reader.entry_offset();
        let comment = packet.comment.ok_or(SplitError::MissingComment { offset })?;
        let (sid, metadata) =
            parse_comment_borrowed(&comment).map_err(|m| SplitError::MalformedComment { offset, comment: m.0 })?;
        tick += 1;
        let fresh = !samples.contains_key(&sid);
        if fresh {
            // the digits before the first '-' are the sid, so names never collide
            let name = sample_file_name(sid, metadata);
            samples.insert(
                sid,
                SampleState {
                    path: out_dir.join(name),
                    metadata: metadata.to_string(),
                    link_type: packet.record.link_type,
                    packets: 0,
                    last_used: tick,
                },
            );
        } else if samples[&sid].metadata != metadata {
            warn!("sample {sid}: packet at byte {offset} carries different metadata; keeping the first");
        }
        let state = samples.get_mut(&sid).expect("inserted above");
        state.last_used = tick;
        state.packets += 1;
        let state = &samples[&sid];
        open.writer(sid, state, &samples, fresh)?.write_record(&packet.record)?;
    }
    for (_, writer) in open.writers.drain() {
        writer.finish()?;
    }

    let ordered: BTreeMap<SampleId, SampleState> = samples.into_iter().collect();
    let mut manifest = BufWriter::new(File::create(out_dir.join(MANIFEST_NAME))?);
    writeln!(manifest, "{MANIFEST_HEADER}")?;
    let mut entries = Vec::with_capacity(ordered.len());
    for (sid, state) in ordered {
        let file_name = state.path.file_name().expect("joined name").to_string_lossy().into_owned();
        if state.metadata.contains(['\n', '\r']) {
            warn!("sample {sid}: metadata contains a line break; the manifest row will span lines");
        }
        writeln!(manifest, "{file_name},{sid},{}", state.metadata)?;
        entries.push(SplitEntry { path: state.path, sample_id: sid, metadata: state.metadata, packets: state.packets });
    }
    manifest.flush()?;
    Ok(entries)
}

/// Reads a manifest back as `(pcap_file, sampleID, metadata)` rows. The
/// metadata column is the remainder of the line, commas included.
pub fn read_manifest(text: &str) -> Result<Vec<(String, SampleId, String)>, SplitError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if i == 0 && line == MANIFEST_HEADER || line.is_empty() {
            continue;
        }
        let bad = |reason: &str| SplitError::BadManifest { line: i + 1, reason: reason.to_string() };
        let mut parts = line.splitn(3, ',');
        let (Some(file), Some(sid), Some(metadata)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected 3 columns"));
        };
        let sid = sid.parse().map_err(|_| bad("sampleid is not an integer"))?;
        rows.push((file.to_string(), SampleId(sid), metadata.to_string()));
    }
    Ok(rows)
}

/// Turns a manifest into a `traffic_filter,metadata` file labeling each split capture.
pub fn manifest_to_metadata_csv(manifest: &str) -> Result<String, SplitError> {
    let mut out = String::from("traffic_filter,metadata\n");
    for (i, (file, _, metadata)) in read_manifest(manifest)?.into_iter().enumerate() {
        if metadata.contains(',') {
            return Err(SplitError::BadManifest { line: i + 2, reason: "metadata with commas has no prefixed-CSV form".into() });
        }
        out.push_str(&format!("FILE:{file},{metadata}\n"));
    }
    Ok(out)
}

/// Rewrites a PCAPNG as a plain PCAP (same packets and timestamps, no
/// comments) and returns `(input bytes, output bytes)`.
pub fn strip_metadata(input: &Path, output: &Path) -> Result<(u64, u64), SplitError> {
    let in_bytes = fs::metadata(input)?.len();
    let mut reader = read_pcapng(BufReader::with_capacity(1 << 20, File::open(input)?))?;
    let sink = BufWriter::with_capacity(1 << 20, File::create(output)?);
    let mut first = reader.next_entry()?;
    let meta = CaptureMeta::new(reader.meta().link_type);
    let mut writer = PcapWriter::new(sink, meta)?;
    while let Some((record, _)) = first.take() {
        writer.write_record(&record)?;
        first = reader.next_entry()?;
    }
    let out_bytes = writer.finish()?;
    Ok((in_bytes, out_bytes))
}

/// `100 * (encoded - stripped) / stripped`.
pub fn overhead_percent(encoded_bytes: u64, stripped_bytes: u64) -> f64 {
    100.0 * (encoded_bytes as f64 - stripped_bytes as f64) / stripped_bytes as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::format_comment;
    use crate::pcap_io::{read_pcap, write_pcapng, RawPacketRecord};

    fn encode(dir: &Path, rows: &[(u64, &str)]) -> (PathBuf, Vec<RawPacketRecord>) {
        let recs: Vec<_> = rows.iter().enumerate().map(|(i, _)| RawPacketRecord::new(i as u64 * 10, 1, vec![i as u8; 70])).collect();
        let comments: Vec<_> = rows.iter().map(|&(sid, m)| format_comment(SampleId(sid), m)).collect();
        let path = dir.join("in.pcapng");
        write_pcapng(File::create(&path).unwrap(), CaptureMeta::default(), recs.iter().zip(&comments).map(|(r, c)| (r, Some(c.as_str())))).unwrap();
        (path, recs)
    }

    fn packets(path: &Path) -> Vec<RawPacketRecord> {
        read_pcap(File::open(path).unwrap()).unwrap().map(|r| r.unwrap()).collect()
    }

    #[test]
    fn sanitizes_names() {
        assert_eq!(sample_file_name(SampleId(3), "a/b c"), "3-a_b_c.pcap");
        assert_eq!(sanitize_metadata("ok-1.2_x"), "ok-1.2_x");
        assert_eq!(sanitize_metadata("é,"), "__");
        assert_eq!(sanitize_metadata(&"x".repeat(300)).len(), 128);
    }

    #[test]
    fn splits_interleaved_samples() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [(0, "google"), (1, "discord"), (0, "google"), (0, "google"), (1, "discord"), (0, "google")];
        let (input, recs) = encode(dir.path(), &rows);
        let out = dir.path().join("split");
        let entries = split_pcapng(&input, &out).unwrap();
        let names: Vec<_> = entries.iter().map(|e| e.path.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["0-google.pcap", "1-discord.pcap"]);
        assert_eq!(entries.iter().map(|e| e.packets).collect::<Vec<_>>(), [4, 2]);
        assert_eq!(packets(&entries[0].path), [recs[0].clone(), recs[2].clone(), recs[3].clone(), recs[5].clone()]);
        assert_eq!(packets(&entries[1].path), [recs[1].clone(), recs[4].clone()]);
        let manifest = fs::read_to_string(out.join(MANIFEST_NAME)).unwrap();
        assert_eq!(manifest, "pcap_file,sampleid,metadata\n0-google.pcap,0,google\n1-discord.pcap,1,discord\n");
        assert_eq!(
            manifest_to_metadata_csv(&manifest).unwrap(),
            "traffic_filter,metadata\nFILE:0-google.pcap,google\nFILE:1-discord.pcap,discord\n"
        );
    }

    #[test]
    fn lru_reopens_for_append() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<(u64, &str)> = (0..40).map(|i| (i % 7, "s")).collect();
        let (input, recs) = encode(dir.path(), &rows);
        let wide = split_pcapng(&input, &dir.path().join("wide")).unwrap();
        let narrow = split_pcapng_with_cap(&input, &dir.path().join("narrow"), 2).unwrap();
        for (w, n) in wide.iter().zip(&narrow) {
            assert_eq!(fs::read(&w.path).unwrap(), fs::read(&n.path).unwrap());
        }
        let sid3: Vec<_> = recs.iter().enumerate().filter(|(i, _)| i % 7 == 3).map(|(_, r)| r.clone()).collect();
        assert_eq!(packets(&narrow[3].path), sid3);
    }

    #[test]
    fn lookalike_metadata_gets_distinct_files() {
        let dir = tempfile::tempdir().unwrap();
        let (input, _) = encode(dir.path(), &[(12, "x"), (1, "2-x"), (1, "2-x"), (2, "a b"), (3, "a/b")]);
        let entries = split_pcapng(&input, &dir.path().join("o")).unwrap();
        let names: Vec<_> = entries.iter().map(|e| e.path.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["1-2-x.pcap", "2-a_b.pcap", "3-a_b.pcap", "12-x.pcap"]);
        assert_eq!(entries.iter().map(|e| e.packets).collect::<Vec<_>>(), [2, 1, 1, 1]);
    }

    #[test]
    fn manifest_keeps_commas() {
        let text = "pcap_file,sampleid,metadata\n0-a_b.pcap,0,a,b\n";
        assert_eq!(read_manifest(text).unwrap(), [("0-a_b.pcap".into(), SampleId(0), "a,b".into())]);
        assert!(manifest_to_metadata_csv(text).is_err());
        assert!(matches!(read_manifest("f,x,m\n"), Err(SplitError::BadManifest { line: 1, .. })));
    }

    #[test]
    fn strip_header_only_and_overhead() {
        let dir = tempfile::tempdir().unwrap();
        let (input, _) = encode(dir.path(), &[]);
        let out = dir.path().join("out.pcap");
        assert_eq!(strip_metadata(&input, &out).unwrap(), (48, 24));
        let (input, recs) = encode(dir.path(), &[(0, "a"), (1, "b")]);
        let (enc, plain) = strip_metadata(&input, &out).unwrap();
        // EPB: 32 + 72 + 8 ("0,a" padded) + 4; PCAP record: 16 + 70
        assert_eq!((enc, plain), (48 + 2 * 116, 24 + 2 * 86));
        assert_eq!(packets(&out), recs);
        assert!((overhead_percent(enc, plain) - 100.0 * 84.0 / 196.0).abs() < 1e-9);
    }
}
