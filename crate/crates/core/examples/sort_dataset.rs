//! Sort an encoded dataset by sampleID, then time, with a small memory budget
//! so the external merge path is used.
//!
//! ```text
//! cargo run --example sort_dataset [-- <budget_bytes>]
//! ```

use pcapml::encoder::{encode_stream, PacketSource};
use pcapml::metadata::LabelSet;
use pcapml::pcap_io::open_capture;
use pcapml::sorter::sort_pcapng_with_budget;
use pcapml::synth::{random_flows, write_pcap_file, BurstyTrace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let budget: usize = std::env::args().nth(1).map(|b| b.parse()).transpose()?.unwrap_or(256 << 10);
    let tmp = tempfile::tempdir()?;
    let flows = random_flows(6, 1);
    let input = tmp.path().join("trace.pcap");
    write_pcap_file(&input, BurstyTrace::new(flows.clone(), 5_000).iter())?;

    // one sample per flow, both directions
    let mut csv = String::from("bpf_filter,timestamp_start,timestamp_end,metadata\n");
    for (i, f) in flows.iter().enumerate() {
        csv.push_str(&format!("host {} and host {},,,flow {i}\n", f.src, f.dst));
    }
    let labels = LabelSet::from_metadata_text(&csv)?;
    let unsorted = tmp.path().join("unsorted.pcapng");
    encode_stream(&PacketSource::SinglePcap(input), &labels, &unsorted)?;

    let sorted = tmp.path().join("sorted.pcapng");
    let report = sort_pcapng_with_budget(&unsorted, &sorted, budget)?;
    println!("sorted {} packets using {} spilled runs (budget {budget} bytes)", report.packets, report.runs);

    let mut reader = open_capture(&sorted)?;
    let mut last = None;
    while let Some(p) = reader.next_packet()? {
        let comment = p.comment.unwrap_or_default();
        if last.as_ref() != Some(&comment) {
            println!("{:.6}  {comment}", p.record.timestamp_secs());
            last = Some(comment);
        }
    }
    Ok(())
}
