//! Synthetic traffic for examples, tests and benchmarks.
//!
//! Frames are well-formed Ethernet/IPv4 or IPv6 with TCP, UDP or ICMP echo
//! headers and valid IPv4 header checksums, so standard tools can dissect them.

use std::fs::File;
use std::io::{self, BufWriter};
use std::net::IpAddr;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pcap_io::{CaptureMeta, PcapError, PcapWriter, RawPacketRecord, LINKTYPE_ETHERNET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transport {
    Tcp { sport: u16, dport: u16 },
    Udp { sport: u16, dport: u16 },
    IcmpEcho,
}

/// One direction of a conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowSpec {
    pub src: IpAddr,
    pub dst: IpAddr,
    pub transport: Transport,
}

impl FlowSpec {
    pub fn tcp(src: &str, dst: &str, sport: u16, dport: u16) -> Self {
        FlowSpec { src: src.parse().unwrap(), dst: dst.parse().unwrap(), transport: Transport::Tcp { sport, dport } }
    }

    pub fn udp(src: &str, dst: &str, sport: u16, dport: u16) -> Self {
        FlowSpec { src: src.parse().unwrap(), dst: dst.parse().unwrap(), transport: Transport::Udp { sport, dport } }
    }

    pub fn icmp(src: &str, dst: &str) -> Self {
        FlowSpec { src: src.parse().unwrap(), dst: dst.parse().unwrap(), transport: Transport::IcmpEcho }
    }

    pub fn reversed(&self) -> Self {
        let transport = match self.transport {
            Transport::Tcp { sport, dport } => Transport::Tcp { sport: dport, dport: sport },
            Transport::Udp { sport, dport } => Transport::Udp { sport: dport, dport: sport },
            Transport::IcmpEcho => Transport::IcmpEcho,
        };
        FlowSpec { src: self.dst, dst: self.src, transport }
    }

    /// Smallest frame this flow can produce (all headers, empty payload).
    pub fn header_len(&self) -> usize {
        let ip = if self.src.is_ipv4() { 20 } else { 40 };
        let l4 = match self.transport {
            Transport::Tcp { .. } => 20,
            Transport::Udp { .. } | Transport::IcmpEcho => 8,
        };
        14 + ip + l4
    }

    /// Builds a frame of exactly `frame_len` bytes (or the header length if larger).
    pub fn frame(&self, frame_len: usize, fill: u8) -> Vec<u8> {
        let payload = frame_len.saturating_sub(self.header_len());
        let mut l4 = Vec::with_capacity(20 + payload);
        let proto = match self.transport {
            Transport::Tcp { sport, dport } => {
                l4.extend_from_slice(&sport.to_be_bytes());
                l4.extend_from_slice(&dport.to_be_bytes());
                l4.extend_from_slice(&[0, 0, 0, 1, 0, 0, 0, 0, 0x50, 0x18, 0xff, 0xff, 0, 0, 0, 0]);
                6
            }
            Transport::Udp { sport, dport } => {
                l4.extend_from_slice(&sport.to_be_bytes());
                l4.extend_from_slice(&dport.to_be_bytes());
                l4.extend_from_slice(&((8 + payload) as u16).to_be_bytes());
                l4.extend_from_slice(&[0, 0]);
                17
            }
            Transport::IcmpEcho => {
                l4.extend_from_slice(&[8, 0, 0, 0, 0, 1, 0, 1]);
                if self.src.is_ipv4() { 1 } else { 58 }
            }
        };
        l4.extend((0..payload).map(|i| fill.wrapping_add(i as u8)));

        let mut frame = Vec::with_capacity(self.header_len() + payload);
        frame.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01]);
        match (self.src, self.dst) {
            (IpAddr::V4(s), IpAddr::V4(d)) => {
                frame.extend_from_slice(&0x0800u16.to_be_bytes());
                let mut ip = [0u8; 20];
                ip[0] = 0x45;
                ip[2..4].copy_from_slice(&((20 + l4.len()) as u16).to_be_bytes());
                ip[6] = 0x40;
                ip[8] = 64;
                ip[9] = proto;
                ip[12..16].copy_from_slice(&s.octets());
                ip[16..20].copy_from_slice(&d.octets());
                let sum = ipv4_checksum(&ip);
                ip[10..12].copy_from_slice(&sum.to_be_bytes());
                frame.extend_from_slice(&ip);
            }
            (IpAddr::V6(s), IpAddr::V6(d)) => {
                frame.extend_from_slice(&0x86DDu16.to_be_bytes());
                frame.extend_from_slice(&[0x60, 0, 0, 0]);
                frame.extend_from_slice(&(l4.len() as u16).to_be_bytes());
                frame.extend_from_slice(&[proto, 64]);
                frame.extend_from_slice(&s.octets());
                frame.extend_from_slice(&d.octets());
            }
            _ => panic!("flow mixes address families"),
        }
        frame.extend_from_slice(&l4);
        frame
    }
}

fn ipv4_checksum(header: &[u8; 20]) -> u16 {
    let mut sum: u32 = header.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

/// Frame length distribution: a small/large bimodal mix tuned to a target mean.
#[derive(Debug, Clone, Copy)]
pub struct FrameSizes {
    small: (usize, usize),
    large: (usize, usize),
    p_large: f64,
}

impl FrameSizes {
    /// Small frames uniform in 60..=200, large in 900..=1514, mixed to hit `mean`.
    pub fn bimodal(mean: f64) -> Self {
        let small = (60, 200);
        let large = (900, 1514);
        let mid = |r: (usize, usize)| (r.0 + r.1) as f64 / 2.0;
        let p_large = ((mean - mid(small)) / (mid(large) - mid(small))).clamp(0.0, 1.0);
        FrameSizes { small, large, p_large }
    }

    pub fn fixed(len: usize) -> Self {
        FrameSizes { small: (len, len), large: (len, len), p_large: 0.0 }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let (lo, hi) = if rng.random_bool(self.p_large) { self.large } else { self.small };
        rng.random_range(lo..=hi)
    }
}

/// Bursty trace: each burst picks one flow and emits a run of packets that
/// alternate direction, mimicking request/response traffic.
#[derive(Debug, Clone)]
pub struct BurstyTrace {
    pub flows: Vec<FlowSpec>,
    pub packets: usize,
    pub mean_burst: usize,
    pub sizes: FrameSizes,
    pub start_us: u64,
    pub seed: u64,
    /// When set, bursts visit flows round-robin instead of at random.
    pub round_robin: bool,
}

impl BurstyTrace {
    pub fn new(flows: Vec<FlowSpec>, packets: usize) -> Self {
        BurstyTrace {
            flows,
            packets,
            mean_burst: 16,
            sizes: FrameSizes::bimodal(449.0),
            start_us: 1_600_000_000_000_000,
            seed: 7,
            round_robin: false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = RawPacketRecord> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut ts = self.start_us;
        let mut remaining_in_burst = 0usize;
        let mut flow_idx = 0usize;
        let mut burst_no = 0usize;
        let mut direction = false;
        (0..self.packets).map(move |i| {
            if remaining_in_burst == 0 {
                flow_idx = if self.round_robin { burst_no % self.flows.len() } else { rng.random_range(0..self.flows.len()) };
                burst_no += 1;
                remaining_in_burst = rng.random_range(1..=2 * self.mean_burst.max(1) - 1);
                direction = false;
            }
            remaining_in_burst -= 1;
            let flow = if direction { self.flows[flow_idx].reversed() } else { self.flows[flow_idx] };
            direction = !direction;
            ts += rng.random_range(1..500);
            let len = self.sizes.sample(&mut rng).max(flow.header_len());
            RawPacketRecord::new(ts, LINKTYPE_ETHERNET, flow.frame(len, i as u8))
        })
    }
}

/// Generates `count` distinct flows over TCP, UDP and ICMP from a seed.
pub fn random_flows(count: usize, seed: u64) -> Vec<FlowSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let src = IpAddr::from([10, (i >> 8) as u8, i as u8, 1]);
            let dst = IpAddr::from([172, 16, rng.random::<u8>(), rng.random_range(1..255)]);
            let transport = match i % 3 {
                0 => Transport::Tcp { sport: rng.random_range(1024..65535), dport: [22, 80, 443][i % 9 / 3] },
                1 => Transport::Udp { sport: rng.random_range(1024..65535), dport: [53, 123, 5353][i % 9 / 3] },
                _ => Transport::IcmpEcho,
            };
            FlowSpec { src, dst, transport }
        })
        .collect()
}

/// Writes records to a new PCAP file, returning its size.
pub fn write_pcap_file<I>(path: &Path, records: I) -> Result<u64, PcapError>
where
    I: IntoIterator<Item = RawPacketRecord>,
{
    let file = File::create(path)?;
    let mut writer = PcapWriter::new(BufWriter::with_capacity(1 << 16, file), CaptureMeta::default())?;
    for record in records {
        writer.write_record(&record)?;
    }
    writer.finish()
}

/// Writes a directory of per-sample PCAPs shaped like a one-file-per-handshake
/// dataset. Returns `(file name, label)` pairs in creation order.
pub fn write_sample_directory(
    dir: &Path,
    samples: &[(&str, &str, FlowSpec)],
    packets_per_sample: usize,
    seed: u64,
) -> io::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, (name, label, flow)) in samples.iter().enumerate() {
        let trace = BurstyTrace {
            flows: vec![*flow],
            packets: packets_per_sample,
            mean_burst: 4,
            sizes: FrameSizes::bimodal(449.0),
            start_us: 1_600_000_000_000_000 + i as u64 * 10_000_000,
            seed: seed.wrapping_add(i as u64),
            round_robin: true,
        };
        write_pcap_file(&dir.join(name), trace.iter()).map_err(io::Error::other)?;
        out.push((name.to_string(), label.to_string()));
    }
    Ok(out)
}
