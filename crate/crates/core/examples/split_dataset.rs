//! Reverse mode: split an encoded dataset into one PCAP per sample plus a
//! `metadata.csv` manifest.
//!
//! ```text
//! cargo run --example split_dataset [-- <in.pcapng> <out_dir>]
//! ```

use std::path::PathBuf;

use pcapml::encoder::encode_directory;
use pcapml::metadata::LabelSet;
use pcapml::splitter::{split_pcapng, MANIFEST_NAME};
use pcapml::synth::{write_sample_directory, FlowSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<PathBuf> = std::env::args_os().skip(1).map(PathBuf::from).collect();
    let tmp = tempfile::tempdir()?;
    let (input, out_dir) = match args.as_slice() {
        [i, o] => (i.clone(), o.clone()),
        _ => {
            let dataset = tmp.path().join("dataset");
            std::fs::create_dir_all(&dataset)?;
            let samples = [
                ("a.pcap", "google", FlowSpec::udp("10.0.0.1", "74.125.250.71", 5000, 19305)),
                ("b.pcap", "discord", FlowSpec::udp("10.0.0.1", "162.159.130.234", 5001, 50004)),
                ("c.pcap", "web/https v6", FlowSpec::tcp("2001:db8::1", "2001:db8::2", 40000, 443)),
            ];
            let mut csv = String::new();
            for (file, label) in write_sample_directory(&dataset, &samples, 10, 3)? {
                csv.push_str(&format!("FILE:{file},{label}\n"));
            }
            let encoded = tmp.path().join("dataset.pcapng");
            encode_directory(&dataset, &LabelSet::from_metadata_text(&csv)?, &encoded)?;
            (encoded, tmp.path().join("split"))
        }
    };

    for entry in split_pcapng(&input, &out_dir)? {
        println!("{:>6} packets  {}", entry.packets, entry.path.display());
    }
    print!("{}", std::fs::read_to_string(out_dir.join(MANIFEST_NAME))?);
    Ok(())
}
