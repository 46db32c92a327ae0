//! Metadata CSV files, sampleID assignment and the `<id>,<metadata>` comment codec.
//!
//! Two line formats are accepted, detected once per file:
//!
//! * Format A: `traffic_filter,metadata[,group_key]`, where the filter is
//!   `FILE:<path>`, `BPF:<expr>` or `TS:<start>-<end>` (either bound may be empty).
//! * Format B: `bpf_filter,timestamp_start,timestamp_end,metadata`. An empty
//!   filter means a time-only window, empty timestamps mean BPF only, and both
//!   together select packets matching the predicate inside the window.
//!
//! Timestamps are Unix epoch seconds with an optional fraction. Blank lines
//! and lines starting with `#` are skipped.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::filter::{parse_epoch_seconds, parse_predicate, FilterAst, InvertedWindow, SyntaxError, TimeWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SampleId(pub u64);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for SampleId {
    fn from(v: u64) -> Self {
        SampleId(v)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetadataError {
    #[error("metadata file is empty")]
    Empty,
    #[error("line {line}: unknown filter prefix in `{text}` (expected FILE:, BPF: or TS:)")]
    UnknownFilterPrefix { line: usize, text: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCountMismatch { line: usize, expected: &'static str, found: usize },
    #[error("line {line}: metadata column is empty")]
    EmptyMetadata { line: usize },
    #[error("line {line}: {source}")]
    FilterSyntaxError { line: usize, source: SyntaxError },
    #[error("line {line}: {source}")]
    InvertedWindow { line: usize, source: InvertedWindow },
    #[error("line {line}: file `{path}` already labeled on line {first_line}")]
    DuplicateFile { line: usize, path: String, first_line: usize },
}

/// Comment text that is not `<decimal id>,<metadata>`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed comment `{0}`")]
pub struct MalformedComment(pub String);

/// One parsed metadata line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataRecord {
    pub filter: FilterAst,
    pub metadata: String,
    pub group_key: Option<String>,
    /// 1-based line number in the source file.
    pub source_line: usize,
}

impl MetadataRecord {
    pub fn new(filter: FilterAst, metadata: impl Into<String>) -> Self {
        MetadataRecord { filter, metadata: metadata.into(), group_key: None, source_line: 0 }
    }

    pub fn with_group(mut self, key: impl Into<String>) -> Self {
        self.group_key = Some(key.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetadataFormat {
    /// `traffic_filter,metadata[,group_key]`
    Prefixed,
    /// `bpf_filter,timestamp_start,timestamp_end,metadata`
    BpfTimestamp,
}

const HEADER_A: &str = "traffic_filter,metadata";
const HEADER_B: &str = "bpf_filter,timestamp_start,timestamp_end,metadata";

fn header_format(line: &str) -> Option<MetadataFormat> {
    let compact: String = line.trim_start_matches('#').chars().filter(|c| !c.is_whitespace()).collect();
    if compact.starts_with(HEADER_B) {
        Some(MetadataFormat::BpfTimestamp)
    } else if compact.starts_with(HEADER_A) {
        Some(MetadataFormat::Prefixed)
    } else {
        None
    }
}

/// Parses a metadata file, detecting its format from the header when present.
pub fn parse_metadata_file(text: &str) -> Result<Vec<MetadataRecord>, MetadataError> {
    let mut detected = None;
    let mut body = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if body.is_empty() && detected.is_none() {
            if let Some(fmt) = header_format(trimmed) {
                detected = Some(fmt);
                continue;
            }
        }
        if trimmed.starts_with('#') {
            continue;
        }
        body.push((idx + 1, line));
    }
    if body.is_empty() && detected.is_none() {
        return Err(MetadataError::Empty);
    }
    match detected {
        Some(fmt) => parse_lines(&body, fmt),
        None => match parse_lines(&body, MetadataFormat::Prefixed) {
            Err(err @ (MetadataError::UnknownFilterPrefix { .. } | MetadataError::ColumnCountMismatch { .. })) => {
                parse_lines(&body, MetadataFormat::BpfTimestamp).map_err(|_| err)
            }
            other => other,
        },
    }
}

/// Parses already-split lines in a known format.
pub fn parse_lines(lines: &[(usize, &str)], format: MetadataFormat) -> Result<Vec<MetadataRecord>, MetadataError> {
    let mut records = Vec::with_capacity(lines.len());
    let mut files: HashMap<String, usize> = HashMap::new();
    for &(line_no, line) in lines {
        let record = match format {
            MetadataFormat::Prefixed => parse_prefixed(line_no, line)?,
            MetadataFormat::BpfTimestamp => parse_bpf_timestamp(line_no, line)?,
        };
        if let FilterAst::File(path) = &record.filter {
            let key = path.trim_start_matches("./").to_string();
            if let Some(&first_line) = files.get(&key) {
                return Err(MetadataError::DuplicateFile { line: line_no, path: path.clone(), first_line });
            }
            files.insert(key, line_no);
        }
        records.push(record);
    }
    Ok(records)
}

fn check_metadata(line: usize, metadata: &str) -> Result<String, MetadataError> {
    if metadata.trim().is_empty() {
        return Err(MetadataError::EmptyMetadata { line });
    }
    Ok(metadata.to_string())
}

fn parse_window(line: usize, start: &str, end: &str) -> Result<TimeWindow, MetadataError> {
    let bound = |s: &str| -> Result<Option<u64>, MetadataError> {
        let s = s.trim();
        if s.is_empty() {
            Ok(None)
        } else {
            parse_epoch_seconds(s).map(Some).map_err(|source| MetadataError::FilterSyntaxError { line, source })
        }
    };
    TimeWindow::new(bound(start)?, bound(end)?).map_err(|source| MetadataError::InvertedWindow { line, source })
}

fn parse_bpf(line: usize, expr: &str) -> Result<crate::filter::Predicate, MetadataError> {
    parse_predicate(expr).map_err(|source| MetadataError::FilterSyntaxError { line, source })
}

fn parse_prefixed(line_no: usize, line: &str) -> Result<MetadataRecord, MetadataError> {
    let fields: Vec<&str> = line.split(',').collect();
    if !(2..=3).contains(&fields.len()) {
        return Err(MetadataError::ColumnCountMismatch { line: line_no, expected: "2 or 3", found: fields.len() });
    }
    let filter_text = fields[0].trim();
    let (prefix, rest) = filter_text.split_once(':').unwrap_or(("", filter_text));
    let filter = match prefix.to_ascii_uppercase().as_str() {
        "FILE" => FilterAst::File(rest.trim().to_string()),
        "BPF" => FilterAst::Bpf(parse_bpf(line_no, rest)?),
        "TS" => {
            let (start, end) = rest.split_once('-').ok_or(MetadataError::FilterSyntaxError {
                line: line_no,
                source: SyntaxError {
                    position: 0,
                    kind: crate::filter::SyntaxErrorKind::BadTimestamp(rest.to_string()),
                },
            })?;
            FilterAst::TimeWindow(parse_window(line_no, start, end)?)
        }
        _ => return Err(MetadataError::UnknownFilterPrefix { line: line_no, text: filter_text.to_string() }),
    };
    let metadata = check_metadata(line_no, fields[1])?;
    let group_key = fields.get(2).map(|g| g.trim()).filter(|g| !g.is_empty()).map(str::to_string);
    Ok(MetadataRecord { filter, metadata, group_key, source_line: line_no })
}

fn parse_bpf_timestamp(line_no: usize, line: &str) -> Result<MetadataRecord, MetadataError> {
    // metadata is the last column and may itself contain commas
    let fields: Vec<&str> = line.splitn(4, ',').collect();
    if fields.len() != 4 {
        return Err(MetadataError::ColumnCountMismatch { line: line_no, expected: "4", found: fields.len() });
    }
    let expr = fields[0].trim();
    let window = parse_window(line_no, fields[1], fields[2])?;
    let has_window = window.start_us().is_some() || window.end_us().is_some();
    let filter = match (expr.is_empty(), has_window) {
        (true, _) => FilterAst::TimeWindow(window),
        (false, false) => FilterAst::Bpf(parse_bpf(line_no, expr)?),
        (false, true) => FilterAst::And(parse_bpf(line_no, expr)?, window),
    };
    let metadata = check_metadata(line_no, fields[3])?;
    Ok(MetadataRecord { filter, metadata, group_key: None, source_line: line_no })
}

/// A record paired with its sampleID and pre-rendered comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledRecord {
    pub record: MetadataRecord,
    pub sample_id: SampleId,
    pub comment: String,
}

/// Records in file order with their assigned sampleIDs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    pub entries: Vec<LabeledRecord>,
}

impl LabelSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct sampleIDs.
    pub fn sample_count(&self) -> usize {
        self.entries.iter().map(|e| e.sample_id).collect::<HashSet<_>>().len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledRecord> {
        self.entries.iter()
    }

    /// Parses a metadata file and assigns ids in one step.
    pub fn from_metadata_text(text: &str) -> Result<Self, MetadataError> {
        parse_metadata_file(text).map(assign_sample_ids)
    }
}

/// Assigns sequential ids from zero in first-appearance order; records
/// sharing a group key share the id of the first one.
pub fn assign_sample_ids(records: Vec<MetadataRecord>) -> LabelSet {
    let mut groups: HashMap<String, SampleId> = HashMap::new();
    let mut next = 0u64;
    let mut fresh = || {
        let id = SampleId(next);
        next += 1;
        id
    };
    let entries = records
        .into_iter()
        .map(|record| {
            let sample_id = match &record.group_key {
                Some(key) => *groups.entry(key.clone()).or_insert_with(&mut fresh),
                None => fresh(),
            };
            let comment = format_comment(sample_id, &record.metadata);
            LabeledRecord { record, sample_id, comment }
        })
        .collect();
    LabelSet { entries }
}

/// Renders `<decimal id>,<metadata>`.
pub fn format_comment(id: SampleId, metadata: &str) -> String {
    format!("{id},{metadata}")
}

/// Splits a comment at its first comma; the remainder is metadata verbatim.
pub fn parse_comment(text: &str) -> Result<(SampleId, String), MalformedComment> {
    let (id, metadata) = parse_comment_borrowed(text)?;
    Ok((id, metadata.to_string()))
}

pub(crate) fn parse_comment_borrowed(text: &str) -> Result<(SampleId, &str), MalformedComment> {
    let malformed = || MalformedComment(text.to_string());
    let (id, metadata) = text.split_once(',').ok_or_else(malformed)?;
    if id.is_empty() || !id.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed());
    }
    let id = id.parse::<u64>().map_err(|_| malformed())?;
    Ok((SampleId(id), metadata))
}
