//! Print `sampleid,metadata` for every packet of an encoded file and check
//! its block structure.
//!
//! ```text
//! cargo run --example inspect_comments -- <dataset.pcapng>
//! ```

use std::collections::BTreeMap;

use pcapml::metadata::parse_comment;
use pcapml::pcap_io::{open_capture, validate_pcapng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let Some(path) = std::env::args_os().nth(1) else {
        eprintln!("usage: inspect_comments <dataset.pcapng>");
        std::process::exit(1);
    };
    let bytes = std::fs::read(&path)?;
    match validate_pcapng(&bytes) {
        Ok(r) => eprintln!("valid: {} blocks, {} interfaces, {} packets, {} comments", r.blocks, r.interfaces, r.packets, r.comments),
        Err(e) => eprintln!("invalid: {e}"),
    }

    let mut per_sample: BTreeMap<u64, (String, usize)> = BTreeMap::new();
    let mut reader = open_capture(std::path::Path::new(&path))?;
    while let Some(p) = reader.next_packet()? {
        let comment = p.comment.unwrap_or_default();
        println!("{comment}");
        if let Ok((id, metadata)) = parse_comment(&comment) {
            per_sample.entry(id.0).or_insert((metadata, 0)).1 += 1;
        }
    }
    for (id, (metadata, n)) in per_sample {
        eprintln!("sample {id:>4}: {n:>6} packets  {metadata}");
    }
    Ok(())
}
