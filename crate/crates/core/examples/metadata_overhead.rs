//! Disk overhead of per-packet metadata: encode one trace with labels of
//! several sizes and compare against the stripped PCAP.
//!
//! ```text
//! cargo run --release --example metadata_overhead [-- <packets>]
//! ```

use pcapml::encoder::{encode_stream, PacketSource};
use pcapml::filter::parse_filter;
use pcapml::metadata::{assign_sample_ids, MetadataRecord};
use pcapml::splitter::{overhead_percent, strip_metadata};
use pcapml::synth::{random_flows, write_pcap_file, BurstyTrace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let packets: usize = std::env::args().nth(1).map(|n| n.parse()).transpose()?.unwrap_or(100_000);
    let tmp = tempfile::tempdir()?;
    let input = tmp.path().join("trace.pcap");
    let trace = BurstyTrace::new(random_flows(32, 2), packets);
    let mean = trace.iter().map(|r| r.data.len()).sum::<usize>() as f64 / packets as f64;
    write_pcap_file(&input, trace.iter())?;
    println!("{packets} packets, mean frame {mean:.1} bytes");
    println!("{:>9} {:>12} {:>12} {:>9}", "metadata", "pcapng", "pcap", "overhead");

    for size in [1usize, 10, 40, 160] {
        let labels = assign_sample_ids(vec![MetadataRecord::new(parse_filter("ip or ip6")?, "x".repeat(size))]);
        let encoded = tmp.path().join("encoded.pcapng");
        encode_stream(&PacketSource::SinglePcap(input.clone()), &labels, &encoded)?;
        let (enc, plain) = strip_metadata(&encoded, &tmp.path().join("stripped.pcap"))?;
        println!("{:>8}B {enc:>12} {plain:>12} {:>8.2}%", size, overhead_percent(enc, plain));
    }
    Ok(())
}
