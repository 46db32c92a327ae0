//! Label a directory of per-sample captures with `FILE:` rules.
//!
//! ```text
//! cargo run --example encode_directory [-- <dataset_dir> <metadata.csv> <out.pcapng>]
//! ```
//!
//! Without arguments a small synthetic dataset is generated first.

use std::path::PathBuf;

use pcapml::encoder::encode_directory;
use pcapml::metadata::LabelSet;
use pcapml::synth::{write_sample_directory, FlowSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<PathBuf> = std::env::args_os().skip(1).map(PathBuf::from).collect();
    let tmp = tempfile::tempdir()?;
    let (dataset, metadata, out) = match args.as_slice() {
        [d, m, o] => (d.clone(), std::fs::read_to_string(m)?, o.clone()),
        _ => {
            let dataset = tmp.path().join("dataset");
            std::fs::create_dir_all(&dataset)?;
            let samples = [
                ("snowflake-1.pcap", "snowflake", FlowSpec::udp("192.168.7.222", "74.125.250.71", 55937, 19305)),
                ("meet-1.pcap", "google meet", FlowSpec::udp("192.168.7.222", "142.250.82.101", 51002, 3478)),
                ("ssh-1.pcap", "ssh", FlowSpec::tcp("10.8.59.231", "128.112.224.83", 58948, 22)),
            ];
            let mut csv = String::from("traffic_filter,metadata\n");
            for (file, label) in write_sample_directory(&dataset, &samples, 25, 1)? {
                csv.push_str(&format!("FILE:{file},{label}\n"));
            }
            print!("metadata.csv:\n{csv}");
            (dataset, csv, tmp.path().join("dataset.pcapng"))
        }
    };

    let labels = LabelSet::from_metadata_text(&metadata)?;
    for entry in labels.iter() {
        println!("sample {} <- {}", entry.sample_id, entry.record.filter);
    }
    let report = encode_directory(&dataset, &labels, &out)?;
    println!("{}", report.summary_line());
    println!("wrote {} ({} bytes)", out.display(), report.bytes_written);
    Ok(())
}
