//! Stream-mode labeling with BPF and timestamp rules, replaying a capture at
//! a fixed rate as a stand-in for a live interface.
//!
//! ```text
//! cargo run --example live_replay [-- <rate_mbps>]
//! ```

use pcapml::encoder::{encode_stream, PacketSource};
use pcapml::metadata::LabelSet;
use pcapml::pcap_io::open_capture;
use pcapml::synth::{write_pcap_file, BurstyTrace, FlowSpec};

// the second form of metadata file: bpf_filter,timestamp_start,timestamp_end,metadata
const METADATA: &str = "\
bpf_filter,timestamp_start,timestamp_end,metadata
ICMP,,,ICMP
port 22,,,SSH
udp and port 53,1600000000.0,1600000000.25,early dns
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rate: f64 = std::env::args().nth(1).map(|r| r.parse()).transpose()?.unwrap_or(20.0);
    let tmp = tempfile::tempdir()?;
    let trace = BurstyTrace::new(
        vec![
            FlowSpec::tcp("10.8.59.231", "128.112.224.83", 58948, 22),
            FlowSpec::icmp("10.8.59.231", "128.112.224.83"),
            FlowSpec::udp("10.8.59.231", "1.1.1.1", 40000, 53),
        ],
        2_000,
    );
    let input = tmp.path().join("live.pcap");
    write_pcap_file(&input, trace.iter())?;

    let labels = LabelSet::from_metadata_text(METADATA)?;
    let out = tmp.path().join("live-dataset.pcapng");
    let source = PacketSource::Stream { path: input, rate_mbps: Some(rate) };
    let report = encode_stream(&source, &labels, &out)?;
    println!("{}", report.summary_line());
    println!("mean filter probes per packet: {:.3}", report.mean_probes());

    let mut reader = open_capture(&out)?;
    for _ in 0..5 {
        if let Some(p) = reader.next_packet()? {
            println!("{:.6}  {}", p.record.timestamp_secs(), p.comment.unwrap_or_default());
        }
    }
    Ok(())
}
