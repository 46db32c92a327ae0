mod common;

use std::fs;

use common::{pcap_packets, pcapng_packets, roundtrip_fixture};
use pcapml::encoder::{encode_directory, encode_stream, PacketSource};
use pcapml::metadata::LabelSet;
use pcapml::splitter::{manifest_to_metadata_csv, split_pcapng, strip_metadata, MANIFEST_NAME};
use pcapml::synth::{write_pcap_file, FlowSpec};
use pcapml::RawPacketRecord;

#[test]
fn encode_split_reproduces_source_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (dataset, csv) = roundtrip_fixture(tmp.path(), 60);
    let labels = LabelSet::from_metadata_text(&csv).unwrap();
    let encoded = tmp.path().join("dataset.pcapng");
    let report = encode_directory(&dataset, &labels, &encoded).unwrap();
    assert_eq!((report.packets_matched, report.samples_seen, report.packets_dropped_unmatched), (300, 5, 0));

    let out = tmp.path().join("split");
    let entries = split_pcapng(&encoded, &out).unwrap();
    assert_eq!(entries.len(), 5);
    for (entry, labeled) in entries.iter().zip(labels.iter()) {
        assert_eq!(entry.sample_id, labeled.sample_id);
        assert_eq!(entry.metadata, labeled.record.metadata);
        let pcapml::filter::FilterAst::File(name) = &labeled.record.filter else { unreachable!() };
        assert_eq!(pcap_packets(&entry.path), pcap_packets(&dataset.join(name)), "{name}");
    }
    assert_eq!(entries[4].path.file_name().unwrap(), "4-web_v6_https.pcap");

    // re-encoding the split output with the manifest labels is byte-identical
    let manifest = fs::read_to_string(out.join(MANIFEST_NAME)).unwrap();
    let relabels = LabelSet::from_metadata_text(&manifest_to_metadata_csv(&manifest).unwrap()).unwrap();
    let again = tmp.path().join("again.pcapng");
    let second = encode_directory(&out, &relabels, &again).unwrap();
    assert_eq!(second.packets_dropped_unmatched, 0);
    assert_eq!(fs::read(&again).unwrap(), fs::read(&encoded).unwrap());
}

#[test]
fn grouped_files_share_one_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let (dataset, _) = roundtrip_fixture(tmp.path(), 10);
    let csv = "traffic_filter,metadata,group\nFILE:google.pcap,video,g\nFILE:discord.pcap,video,g\nFILE:ssh.pcap,shell,\n";
    let labels = LabelSet::from_metadata_text(csv).unwrap();
    let encoded = tmp.path().join("e.pcapng");
    let report = encode_directory(&dataset, &labels, &encoded).unwrap();
    assert_eq!(report.samples_seen, 2);
    // the two unlisted captures are read but not labeled
    assert_eq!(report.packets_dropped_unmatched, 20);
    let comments: Vec<_> = pcapng_packets(&encoded).into_iter().map(|(_, c)| c.unwrap()).collect();
    assert_eq!(comments.iter().filter(|c| *c == "0,video").count(), 20);
    assert_eq!(comments.iter().filter(|c| *c == "1,shell").count(), 10);
    let entries = split_pcapng(&encoded, &tmp.path().join("s")).unwrap();
    assert_eq!(entries.iter().map(|e| e.packets).collect::<Vec<_>>(), [20, 10]);
}

#[test]
fn strip_then_reencode_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let flows = [FlowSpec::tcp("10.0.0.1", "10.0.0.2", 4000, 22), FlowSpec::icmp("10.0.0.1", "10.0.0.3")];
    let mut trace = pcapml::synth::BurstyTrace::new(flows.to_vec(), 400);
    trace.seed = 5;
    let input = tmp.path().join("live.pcap");
    write_pcap_file(&input, trace.iter()).unwrap();
    let labels = LabelSet::from_metadata_text("port 22,,,ssh\nicmp,,,ping\n").unwrap();

    let first = tmp.path().join("first.pcapng");
    let report = encode_stream(&PacketSource::SinglePcap(input.clone()), &labels, &first).unwrap();
    assert_eq!(report.packets_matched, 400);
    let stripped = tmp.path().join("stripped.pcap");
    let (enc, plain) = strip_metadata(&first, &stripped).unwrap();
    assert_eq!(fs::read(&stripped).unwrap(), fs::read(&input).unwrap());
    assert!(enc > plain);
    let second = tmp.path().join("second.pcapng");
    encode_stream(&PacketSource::SinglePcap(stripped), &labels, &second).unwrap();
    assert_eq!(fs::read(&second).unwrap(), fs::read(&first).unwrap());
}

#[test]
fn directory_paths_resolve_relative_or_absolute() {
    let tmp = tempfile::tempdir().unwrap();
    let (dataset, _) = roundtrip_fixture(tmp.path(), 3);
    let abs = dataset.join("ping.pcap");
    let csv = format!("FILE:./ssh.pcap,a\nFILE:{},b\n", abs.display());
    let labels = LabelSet::from_metadata_text(&csv).unwrap();
    let out = tmp.path().join("o.pcapng");
    let report = encode_directory(&dataset, &labels, &out).unwrap();
    assert_eq!(report.packets_matched, 6);
    // the same file twice under different spellings is rejected
    let dup = format!("FILE:ssh.pcap,a\nFILE:{},b\n", dataset.join("ssh.pcap").display());
    let labels = LabelSet::from_metadata_text(&dup).unwrap();
    assert!(matches!(encode_directory(&dataset, &labels, &out), Err(pcapml::encoder::EncodeError::DuplicateFile { .. })));
}

#[test]
fn unparseable_files_in_dataset_are_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let (dataset, csv) = roundtrip_fixture(tmp.path(), 4);
    fs::write(dataset.join("README.txt"), "not a capture").unwrap();
    let labels = LabelSet::from_metadata_text(&csv).unwrap();
    let report = encode_directory(&dataset, &labels, &dataset.join("out.pcapng")).unwrap();
    assert_eq!((report.packets_read, report.packets_dropped_unmatched), (20, 0));
}

#[test]
fn ipv6_time_window_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let flow = FlowSpec::udp("2001:db8::1", "2001:db8::2", 1000, 53);
    let recs: Vec<_> = (0..10u64).map(|i| RawPacketRecord::new(100_000_000 + i * 500_000, 1, flow.frame(80, i as u8))).collect();
    let input = tmp.path().join("t.pcap");
    write_pcap_file(&input, recs).unwrap();
    let csv = "bpf_filter,timestamp_start,timestamp_end,metadata\nip6,100.0,101.0,early\n,101.5,,late\n";
    let labels = LabelSet::from_metadata_text(csv).unwrap();
    let out = tmp.path().join("o.pcapng");
    let report = encode_stream(&PacketSource::SinglePcap(input), &labels, &out).unwrap();
    let comments: Vec<_> = pcapng_packets(&out).into_iter().map(|(_, c)| c.unwrap()).collect();
    // 100.0..=101.0 holds packets 0..=2; 101.5 onward holds 3..=9
    assert_eq!(comments, ["0,early", "0,early", "0,early", "1,late", "1,late", "1,late", "1,late", "1,late", "1,late", "1,late"]);
    assert_eq!(report.packets_dropped_unmatched, 0);
}
