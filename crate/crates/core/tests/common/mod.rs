//! Shared fixtures: random packets and filters, and a naive filter
//! interpreter that re-reads the raw frame for every primitive instead of
//! going through `decode_headers`.

#![allow(dead_code)]

use std::net::IpAddr;
use std::path::Path;

use pcapml::filter::{Cidr, FilterAst, Predicate, Proto, TimeWindow};
use pcapml::synth::FlowSpec;
use rand::seq::IndexedRandom;
use rand::Rng;

pub const V4_POOL: [&str; 5] = ["10.0.0.1", "10.0.0.2", "10.1.2.3", "192.168.1.1", "172.16.5.4"];
pub const V6_POOL: [&str; 3] = ["2001:db8::1", "2001:db8::2", "fe80::1"];
pub const PORT_POOL: [u16; 6] = [22, 53, 80, 443, 1234, 5353];

fn addr<R: Rng>(rng: &mut R, v6: bool) -> IpAddr {
    if v6 { V6_POOL.choose(rng) } else { V4_POOL.choose(rng) }.unwrap().parse().unwrap()
}

fn port<R: Rng>(rng: &mut R) -> u16 {
    if rng.random_bool(0.8) { *PORT_POOL.choose(rng).unwrap() } else { rng.random() }
}

/// A frame that is usually well formed but sometimes truncated, fragmented,
/// VLAN-tagged, carries an IPv6 extension header, a bogus IHL or a non-IP EtherType.
pub fn random_frame<R: Rng>(rng: &mut R) -> Vec<u8> {
    let v6 = rng.random_bool(0.3);
    let (src, dst) = (addr(rng, v6), addr(rng, v6));
    let transport = match rng.random_range(0..3) {
        0 => pcapml::synth::Transport::Tcp { sport: port(rng), dport: port(rng) },
        1 => pcapml::synth::Transport::Udp { sport: port(rng), dport: port(rng) },
        _ => pcapml::synth::Transport::IcmpEcho,
    };
    let flow = FlowSpec { src, dst, transport };
    let mut f = flow.frame(rng.random_range(flow.header_len()..flow.header_len() + 80), rng.random());

    if v6 && rng.random_bool(0.15) {
        // hop-by-hop options in front of the upper-layer header
        let next = f[20];
        f[20] = 0;
        f.splice(54..54, [next, 0, 1, 4, 0, 0, 0, 0]);
    }
    if !v6 && rng.random_bool(0.1) {
        let offset: u16 = rng.random_range(1..0x2000);
        f[20..22].copy_from_slice(&offset.to_be_bytes());
    }
    if !v6 && rng.random_bool(0.05) {
        f[14] = 0x40 | rng.random_range(0..16u8);
    }
    if rng.random_bool(0.1) {
        f.splice(12..12, [0x81, 0x00, 0x00, rng.random()]);
    }
    if rng.random_bool(0.05) {
        let at = if f[12..14] == [0x81, 0x00] { 16 } else { 12 };
        f[at..at + 2].copy_from_slice(&0x0806u16.to_be_bytes());
    }
    if rng.random_bool(0.15) {
        f.truncate(rng.random_range(0..=f.len()));
    }
    f
}

pub fn random_leaf<R: Rng>(rng: &mut R) -> Predicate {
    let v6 = rng.random_bool(0.3);
    match rng.random_range(0..8) {
        0 => Predicate::Host(addr(rng, v6)),
        1 => Predicate::SrcHost(addr(rng, v6)),
        2 => Predicate::DstHost(addr(rng, v6)),
        3 => {
            let a = addr(rng, v6);
            let prefix = rng.random_range(0..=if v6 { 128 } else { 32 });
            Predicate::Net(Cidr::new(a, prefix).unwrap())
        }
        4 => Predicate::Port(port(rng)),
        5 => Predicate::SrcPort(port(rng)),
        6 => Predicate::DstPort(port(rng)),
        _ => Predicate::Proto(*[Proto::Tcp, Proto::Udp, Proto::Icmp, Proto::Ip, Proto::Ip6].choose(rng).unwrap()),
    }
}

/// Random predicate of depth at most `max_depth` (a leaf has depth 1).
pub fn random_predicate<R: Rng>(rng: &mut R, max_depth: usize) -> Predicate {
    if max_depth <= 1 || rng.random_bool(0.3) {
        return random_leaf(rng);
    }
    match rng.random_range(0..3) {
        0 => Predicate::and(random_predicate(rng, max_depth - 1), random_predicate(rng, max_depth - 1)),
        1 => Predicate::or(random_predicate(rng, max_depth - 1), random_predicate(rng, max_depth - 1)),
        _ => Predicate::not(random_predicate(rng, max_depth - 1)),
    }
}

pub fn random_window<R: Rng>(rng: &mut R, lo: u64, hi: u64) -> TimeWindow {
    let mut a = rng.random_range(lo..=hi);
    let mut b = rng.random_range(lo..=hi);
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let start = rng.random_bool(0.8).then_some(a);
    let end = rng.random_bool(0.8).then_some(b);
    TimeWindow::new(start, end).unwrap()
}

pub fn random_filter<R: Rng>(rng: &mut R, max_depth: usize, lo: u64, hi: u64) -> FilterAst {
    match rng.random_range(0..6) {
        0 => FilterAst::TimeWindow(random_window(rng, lo, hi)),
        1 => FilterAst::And(random_predicate(rng, max_depth), random_window(rng, lo, hi)),
        _ => FilterAst::Bpf(random_predicate(rng, max_depth)),
    }
}

// ---- naive interpreter ----

fn get16(f: &[u8], at: usize) -> Option<u16> {
    Some(u16::from_be_bytes([*f.get(at)?, *f.get(at + 1)?]))
}

/// (EtherType, offset of the network header).
fn network(f: &[u8]) -> Option<(u16, usize)> {
    if f.len() < 14 {
        return None;
    }
    match get16(f, 12)? {
        0x8100 => Some((get16(f, 16)?, 18)),
        t => Some((t, 14)),
    }
}

struct Ip {
    src: IpAddr,
    dst: IpAddr,
    proto: Option<u8>,
    transport_at: Option<usize>,
    later_fragment: bool,
}

fn ip(f: &[u8]) -> Option<Ip> {
    let (etype, n) = network(f)?;
    match etype {
        0x0800 => {
            let h = f.get(n..n + 20)?;
            let ihl = usize::from(h[0] & 15);
            if h[0] >> 4 != 4 || ihl < 5 {
                return None;
            }
            let src = IpAddr::from(<[u8; 4]>::try_from(&h[12..16]).unwrap());
            let dst = IpAddr::from(<[u8; 4]>::try_from(&h[16..20]).unwrap());
            let frag_offset = u16::from_be_bytes([h[6], h[7]]) & 0x1fff;
            Some(Ip { src, dst, proto: Some(h[9]), transport_at: Some(n + ihl * 4), later_fragment: frag_offset > 0 })
        }
        0x86DD => {
            let h = f.get(n..n + 40)?;
            if h[0] >> 4 != 6 {
                return None;
            }
            let src = IpAddr::from(<[u8; 16]>::try_from(&h[8..24]).unwrap());
            let dst = IpAddr::from(<[u8; 16]>::try_from(&h[24..40]).unwrap());
            let mut out = Ip { src, dst, proto: None, transport_at: None, later_fragment: false };
            let (mut next, mut at) = (h[6], n + 40);
            for _ in 0..8 {
                let len = match next {
                    0 | 43 | 60 => match f.get(at + 1) {
                        Some(&l) => 8 * (usize::from(l) + 1),
                        None => return Some(out),
                    },
                    44 => 8,
                    upper => {
                        out.proto = Some(upper);
                        out.transport_at = Some(at);
                        return Some(out);
                    }
                };
                if f.len() < at + len {
                    return Some(out);
                }
                if next == 44 && get16(f, at + 2)? & 0xfff8 != 0 {
                    out.later_fragment = true;
                }
                next = f[at];
                at += len;
            }
            Some(out)
        }
        _ => None,
    }
}

fn ports(f: &[u8]) -> Option<(u16, u16)> {
    let ip = ip(f)?;
    if ip.later_fragment || !matches!(ip.proto, Some(6 | 17)) {
        return None;
    }
    let at = ip.transport_at?;
    Some((get16(f, at)?, get16(f, at + 2)?))
}

fn ether_is(f: &[u8], t: u16) -> bool {
    network(f).is_some_and(|(e, _)| e == t)
}

/// Evaluates `pred` by re-reading the raw Ethernet frame for every primitive.
pub fn naive_predicate(pred: &Predicate, f: &[u8]) -> bool {
    match pred {
        Predicate::Host(a) => ip(f).is_some_and(|i| i.src == *a || i.dst == *a),
        Predicate::SrcHost(a) => ip(f).is_some_and(|i| i.src == *a),
        Predicate::DstHost(a) => ip(f).is_some_and(|i| i.dst == *a),
        Predicate::Net(c) => ip(f).is_some_and(|i| c.contains(i.src) || c.contains(i.dst)),
        Predicate::Port(p) => ports(f).is_some_and(|(s, d)| s == *p || d == *p),
        Predicate::SrcPort(p) => ports(f).is_some_and(|(s, _)| s == *p),
        Predicate::DstPort(p) => ports(f).is_some_and(|(_, d)| d == *p),
        Predicate::Proto(Proto::Tcp) => ip(f).is_some_and(|i| i.proto == Some(6)),
        Predicate::Proto(Proto::Udp) => ip(f).is_some_and(|i| i.proto == Some(17)),
        Predicate::Proto(Proto::Icmp) => ether_is(f, 0x0800) && ip(f).is_some_and(|i| i.proto == Some(1)),
        Predicate::Proto(Proto::Ip) => ether_is(f, 0x0800),
        Predicate::Proto(Proto::Ip6) => ether_is(f, 0x86DD),
        Predicate::And(a, b) => naive_predicate(a, f) && naive_predicate(b, f),
        Predicate::Or(a, b) => naive_predicate(a, f) || naive_predicate(b, f),
        Predicate::Not(a) => !naive_predicate(a, f),
    }
}

pub fn naive_filter(ast: &FilterAst, f: &[u8], ts_us: u64) -> bool {
    let inside = |w: &TimeWindow| w.start_us().is_none_or(|s| s <= ts_us) && w.end_us().is_none_or(|e| ts_us <= e);
    match ast {
        FilterAst::File(_) => false,
        FilterAst::Bpf(p) => naive_predicate(p, f),
        FilterAst::TimeWindow(w) => inside(w),
        FilterAst::And(p, w) => naive_predicate(p, f) && inside(w),
    }
}

/// Reads every packet record from a PCAP file.
pub fn pcap_packets(path: &Path) -> Vec<pcapml::RawPacketRecord> {
    pcapml::pcap_io::read_pcap(std::fs::File::open(path).unwrap()).unwrap().map(|r| r.unwrap()).collect()
}

/// Reads `(record, comment)` pairs from a PCAPNG file.
pub fn pcapng_packets(path: &Path) -> Vec<(pcapml::RawPacketRecord, Option<String>)> {
    let reader = pcapml::pcap_io::read_pcapng(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap();
    let mut reader = reader;
    let mut out = Vec::new();
    while let Some(p) = reader.next_packet().unwrap() {
        out.push((p.record, p.comment));
    }
    out
}

/// Writes a directory of per-sample captures (mixed TCP/UDP/ICMP, IPv4 and
/// IPv6) and returns the directory and its metadata CSV text.
pub fn roundtrip_fixture(root: &Path, packets_per_sample: usize) -> (std::path::PathBuf, String) {
    let dataset = root.join("dataset");
    std::fs::create_dir_all(&dataset).unwrap();
    let samples = [
        ("google.pcap", "google", FlowSpec::udp("192.168.7.222", "74.125.250.71", 55937, 19305)),
        ("discord.pcap", "discord", FlowSpec::udp("192.168.7.222", "162.159.130.234", 50001, 50004)),
        ("ssh.pcap", "ssh", FlowSpec::tcp("10.8.59.231", "128.112.224.83", 58948, 22)),
        ("ping.pcap", "ping", FlowSpec::icmp("10.8.59.231", "128.112.224.83")),
        ("web6.pcap", "web v6/https", FlowSpec::tcp("2001:db8::10", "2001:db8::443", 40123, 443)),
    ];
    let written = pcapml::synth::write_sample_directory(&dataset, &samples, packets_per_sample, 99).unwrap();
    let mut csv = String::from("traffic_filter,metadata\n");
    for (file, label) in written {
        csv.push_str(&format!("FILE:{file},{label}\n"));
    }
    (dataset, csv)
}
