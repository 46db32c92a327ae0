//! Label network-traffic datasets by writing `sampleID,metadata` into the
//! comment option of every PCAPNG packet block.
//!
//! The crate covers the whole labeling toolchain:
//!
//! * [`pcap_io`]: PCAP and PCAPNG readers/writers plus a structural validator.
//! * [`decode`]: Ethernet/VLAN/IPv4/IPv6/TCP/UDP/ICMP header fields.
//! * [`filter`]: a tcpdump-style filter subset, timestamp windows and their conjunction.
//! * [`metadata`]: metadata CSV parsing, sampleID assignment and the comment codec.
//! * [`encoder`]: directory and stream encoding passes.
//! * [`sorter`]: external-memory sort by `(sampleID, timestamp)`.
//! * [`splitter`]: one PCAP per sample plus a manifest, and metadata stripping.
//! * [`cli`]: the `pcapml` command line.
//! * [`synth`]: deterministic synthetic traffic for examples and benchmarks.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod decode;
pub mod encoder;
pub mod filter;
pub mod metadata;
pub mod pcap_io;
pub mod sorter;
pub mod splitter;
pub mod synth;

pub use decode::{decode_headers, HeaderView};
pub use pcap_io::{CaptureMeta, RawPacketRecord};
