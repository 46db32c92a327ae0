use std::fs;

use pcapml::metadata::{format_comment, parse_comment, SampleId};
use pcapml::pcap_io::{read_pcapng, write_pcapng, CaptureMeta};
use pcapml::sorter::{sort_pcapng_with_budget, sort_stream};
use pcapml::RawPacketRecord;
use proptest::prelude::*;

fn encode(keys: &[(u64, u64)]) -> Vec<u8> {
    let entries: Vec<_> = keys
        .iter()
        .enumerate()
        .map(|(i, &(sid, ts))| (RawPacketRecord::new(ts, 1, (i as u32).to_le_bytes().repeat(16)), format_comment(SampleId(sid), &format!("s{sid}"))))
        .collect();
    let mut out = Vec::new();
    write_pcapng(&mut out, CaptureMeta::default(), entries.iter().map(|(r, c)| (r, Some(c.as_str())))).unwrap();
    out
}

fn triples(bytes: &[u8]) -> Vec<(u64, u64, Vec<u8>)> {
    let mut r = read_pcapng(bytes).unwrap();
    let mut out = Vec::new();
    while let Some(p) = r.next_packet().unwrap() {
        out.push((parse_comment(&p.comment.unwrap()).unwrap().0 .0, p.record.timestamp_us, p.record.data));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn sorted_permutation_and_idempotent(keys in proptest::collection::vec((0u64..6, 0u64..50), 0..300), budget in 1usize..20_000) {
        let input = encode(&keys);
        let mut once = Vec::new();
        sort_stream(&input[..], &mut once, budget).unwrap();
        let got = triples(&once);
        let ks: Vec<_> = got.iter().map(|t| (t.0, t.1)).collect();
        prop_assert!(ks.windows(2).all(|w| w[0] <= w[1]));
        let mut want = triples(&input);
        // stable: equal keys keep input order
        want.sort_by_key(|t| (t.0, t.1));
        prop_assert_eq!(&got, &want);
        let mut twice = Vec::new();
        sort_stream(&once[..], &mut twice, budget).unwrap();
        prop_assert_eq!(twice, once);
    }
}

#[test]
fn file_api_and_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let keys: Vec<_> = (0..2_000u64).map(|i| (i % 17, 2_000 - i)).collect();
    let input = tmp.path().join("u.pcapng");
    fs::write(&input, encode(&keys)).unwrap();
    let out = tmp.path().join("s.pcapng");
    let report = sort_pcapng_with_budget(&input, &out, 32 << 10).unwrap();
    assert_eq!(report.packets, 2_000);
    assert!(report.runs > 1, "{report:?}");
    assert_eq!(report.bytes_written, fs::metadata(&out).unwrap().len());
    assert_eq!(fs::metadata(&out).unwrap().len(), fs::metadata(&input).unwrap().len());
}
