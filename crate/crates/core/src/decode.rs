//! Best-effort decoding of the header fields the filter engine inspects.
//!
//! Decoding never fails: fields that cannot be read from the captured bytes
//! are left as `None`.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use crate::pcap_io::LINKTYPE_ETHERNET;

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_IPV6: u16 = 0x86DD;
pub const ETHERTYPE_VLAN: u16 = 0x8100;

pub const IPPROTO_ICMP: u8 = 1;
pub const IPPROTO_TCP: u8 = 6;
pub const IPPROTO_UDP: u8 = 17;

const ETHER_HEADER_LEN: usize = 14;
const MAX_IPV6_EXTENSIONS: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct HeaderView {
    /// EtherType after unwrapping at most one VLAN tag.
    pub ether_type: Option<u16>,
    pub src_ip: Option<IpAddr>,
    pub dst_ip: Option<IpAddr>,
    /// IPv4 protocol, or the upper-layer IPv6 next header after extension headers.
    pub ip_proto: Option<u8>,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    /// Set for fragments other than the first; those never carry ports.
    pub is_fragment_continuation: bool,
}

fn be16(data: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([data[at], data[at + 1]])
}

/// Decodes Ethernet, one optional VLAN tag, IPv4/IPv6 and TCP/UDP ports.
pub fn decode_headers(data: &[u8], link_type: u32) -> HeaderView {
    let mut view = HeaderView::default();
    if link_type != LINKTYPE_ETHERNET || data.len() < ETHER_HEADER_LEN {
        return view;
    }
    let mut ether_type = be16(data, 12);
    let mut offset = ETHER_HEADER_LEN;
    if ether_type == ETHERTYPE_VLAN {
        if data.len() < offset + 4 {
            return view;
        }
        ether_type = be16(data, offset + 2);
        offset += 4;
    }
    view.ether_type = Some(ether_type);
    let transport = match ether_type {
        ETHERTYPE_IPV4 => decode_ipv4(data, offset, &mut view),
        ETHERTYPE_IPV6 => decode_ipv6(data, offset, &mut view),
        _ => None,
    };
    if let (Some(at), Some(IPPROTO_TCP | IPPROTO_UDP)) = (transport, view.ip_proto) {
        if !view.is_fragment_continuation && data.len() >= at + 4 {
            view.src_port = Some(be16(data, at));
            view.dst_port = Some(be16(data, at + 2));
        }
    }
    view
}

/// Fills IPv4 fields and returns the transport header offset.
fn decode_ipv4(data: &[u8], at: usize, view: &mut HeaderView) -> Option<usize> {
    if data.len() < at + 20 || data[at] >> 4 != 4 {
        return None;
    }
    let header_len = (data[at] & 0x0f) as usize * 4;
    if header_len < 20 {
        return None;
    }
    let ip = &data[at..];
    view.src_ip = Some(IpAddr::V4(Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15])));
    view.dst_ip = Some(IpAddr::V4(Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19])));
    view.ip_proto = Some(ip[9]);
    view.is_fragment_continuation = be16(ip, 6) & 0x1fff != 0;
    Some(at + header_len)
}

fn decode_ipv6(data: &[u8], at: usize, view: &mut HeaderView) -> Option<usize> {
    if data.len() < at + 40 || data[at] >> 4 != 6 {
        return None;
    }
    let addr = |from: usize| {
        let octets: [u8; 16] = data[from..from + 16].try_into().unwrap();
        IpAddr::V6(Ipv6Addr::from(octets))
    };
    view.src_ip = Some(addr(at + 8));
    view.dst_ip = Some(addr(at + 24));

    let mut next = data[at + 6];
    let mut cursor = at + 40;
    for _ in 0..MAX_IPV6_EXTENSIONS {
        match next {
            // hop-by-hop, routing, destination options
            0 | 43 | 60 => {
                if data.len() < cursor + 2 {
                    return None;
                }
                let ext_len = (data[cursor + 1] as usize + 1) * 8;
                if data.len() < cursor + ext_len {
                    return None;
                }
                next = data[cursor];
                cursor += ext_len;
            }
            44 => {
                if data.len() < cursor + 8 {
                    return None;
                }
                if be16(data, cursor + 2) >> 3 != 0 {
                    view.is_fragment_continuation = true;
                }
                next = data[cursor];
                cursor += 8;
            }
            proto => {
                view.ip_proto = Some(proto);
                return Some(cursor);
            }
        }
    }
    None
}
