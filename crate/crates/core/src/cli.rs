//! The `pcapml` command line.
//!
//! ```text
//! pcapml -D dataset/ -L metadata.csv -W dataset.pcapng        directory encode
//! pcapml -P trace.pcap -L metadata.csv -W dataset.pcapng      single-capture encode
//! pcapml --replay trace.pcap [--rate 100] -L m.csv -W o.pcapng paced stream encode
//! pcapml -M dataset.pcapng -s -W sorted.pcapng                sort
//! pcapml -M dataset.pcapng -O out_dir/                        split
//! pcapml inspect -M dataset.pcapng                            print comments
//! ```
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.
//! Summaries go to standard output, diagnostics to standard error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::encoder::{encode_directory, encode_stream, PacketSource};
use crate::metadata::LabelSet;
use crate::pcap_io::read_pcapng;
use crate::sorter::sort_pcapng;
use crate::splitter::split_pcapng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pcapml", version, about = "Label, sort and split packet-capture datasets")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    modes: ModeArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print `sampleid,metadata` for every packet.
    Inspect {
        #[arg(short = 'M', value_name = "PCAPNG")]
        input: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ModeArgs {
    /// Directory of captures labeled by FILE: rules.
    #[arg(short = 'D', value_name = "DIR")]
    dir: Option<PathBuf>,
    /// One capture labeled by BPF/timestamp rules.
    #[arg(short = 'P', value_name = "PCAP")]
    pcap: Option<PathBuf>,
    /// Replay a capture as a live stream.
    #[arg(long, value_name = "PCAP")]
    replay: Option<PathBuf>,
    /// Replay rate in Mbit/s (default: as fast as possible).
    #[arg(long, value_name = "MBPS", requires = "replay")]
    rate: Option<f64>,
    /// Metadata CSV.
    #[arg(short = 'L', value_name = "CSV")]
    labels: Option<PathBuf>,
    /// Output PCAPNG.
    #[arg(short = 'W', value_name = "PCAPNG")]
    write: Option<PathBuf>,
    /// Encoded PCAPNG to sort or split.
    #[arg(short = 'M', value_name = "PCAPNG")]
    input: Option<PathBuf>,
    /// Sort the -M input into -W.
    #[arg(short = 's', requires = "input")]
    sort: bool,
    /// Split the -M input into one PCAP per sample.
    #[arg(short = 'O', value_name = "DIR", requires = "input")]
    out_dir: Option<PathBuf>,
}

enum Mode {
    Encode { source: PacketSource, labels: PathBuf, out: PathBuf },
    Sort { input: PathBuf, out: PathBuf },
    Split { input: PathBuf, out_dir: PathBuf },
    Inspect { input: PathBuf },
}

fn resolve(cli: Cli) -> Result<Mode, String> {
    if let Some(Command::Inspect { input }) = cli.command {
        return Ok(Mode::Inspect { input });
    }
    let m = cli.modes;
    if let Some(input) = m.input {
        if m.dir.is_some() || m.pcap.is_some() || m.replay.is_some() || m.labels.is_some() {
            return Err("-M cannot be combined with encoding flags (-D, -P, --replay, -L)".into());
        }
        return match (m.sort, m.out_dir, m.write) {
            (true, None, Some(out)) => Ok(Mode::Sort { input, out }),
            (true, None, None) => Err("sorting needs an output file: -M <in> -s -W <out>".into()),
            (false, Some(out_dir), None) => Ok(Mode::Split { input, out_dir }),
            (true, Some(_), _) => Err("choose one of -s (sort) or -O (split)".into()),
            (false, Some(_), Some(_)) => Err("-W is not used when splitting with -O".into()),
            (false, None, _) => Err("-M needs -s -W <out> to sort or -O <dir> to split".into()),
        };
    }
    let source = match (m.dir, m.pcap, m.replay) {
        (Some(d), None, None) => PacketSource::Directory(d),
        (None, Some(p), None) => PacketSource::SinglePcap(p),
        (None, None, Some(path)) => {
            if let Some(rate) = m.rate {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(format!("--rate must be a positive number of Mbit/s, got {rate}"));
                }
            }
            PacketSource::Stream { path, rate_mbps: m.rate }
        }
        (None, None, None) if m.labels.is_some() || m.write.is_some() => {
            return Err("no packet source given: use -D <dir>, -P <pcap>, or --replay <pcap> to stand in for a live interface".into())
        }
        (None, None, None) => return Err("nothing to do; see --help".into()),
        _ => return Err("use exactly one of -D, -P or --replay".into()),
    };
    let labels = m.labels.ok_or("encoding needs a metadata file: -L <csv>")?;
    let out = m.write.ok_or("encoding needs an output file: -W <pcapng>")?;
    Ok(Mode::Encode { source, labels, out })
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn execute(mode: Mode, stdout: &mut dyn Write) -> Result<(), Box<dyn std::error::Error>> {
    match mode {
        Mode::Encode { source, labels, out } => {
            let text = fs::read_to_string(&labels).map_err(|e| format!("{}: {e}", labels.display()))?;
            let labels = LabelSet::from_metadata_text(&text).map_err(|e| format!("{}: {e}", labels.display()))?;
            let report = match &source {
                PacketSource::Directory(dir) => encode_directory(dir, &labels, &out)?,
                _ => encode_stream(&source, &labels, &out)?,
            };
            writeln!(stdout, "{}", report.summary_line())?;
        }
        Mode::Sort { input, out } => {
            if same_file(&input, &out) {
                return Err("sorting in place is not supported; choose a different -W".into());
            }
            let report = sort_pcapng(&input, &out)?;
            writeln!(stdout, "packets={} runs={} bytes={}", report.packets, report.runs, report.bytes_written)?;
        }
        Mode::Split { input, out_dir } => {
            let entries = split_pcapng(&input, &out_dir)?;
            let packets: u64 = entries.iter().map(|e| e.packets).sum();
            writeln!(stdout, "samples={} packets={packets}", entries.len())?;
        }
        Mode::Inspect { input } => {
            let file = File::open(&input).map_err(|e| format!("{}: {e}", input.display()))?;
            let mut reader = read_pcapng(BufReader::new(file))?;
            while let Some(packet) = reader.next_packet()? {
                writeln!(stdout, "{}", packet.comment.unwrap_or_default())?;
            }
        }
    }
    Ok(())
}

/// Runs the command line with explicit streams and returns the exit status.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            return if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{err}");
                EXIT_OK
            } else {
                let _ = write!(stderr, "{}", err.render());
                EXIT_USAGE
            };
        }
    };
    let mode = match resolve(cli) {
        Ok(mode) => mode,
        Err(msg) => {
            let _ = writeln!(stderr, "pcapml: {msg}");
            return EXIT_USAGE;
        }
    };
    match execute(mode, stdout) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let _ = writeln!(stderr, "pcapml: {err}");
            EXIT_DATA
        }
    }
}

/// Runs with the process arguments and standard streams.
pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
