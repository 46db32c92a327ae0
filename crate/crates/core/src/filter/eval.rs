use crate::decode::{HeaderView, ETHERTYPE_IPV4, ETHERTYPE_IPV6, IPPROTO_ICMP, IPPROTO_TCP, IPPROTO_UDP};

use super::{FilterAst, Predicate, Proto};

/// Evaluates a filter against one decoded packet and its timestamp.
///
/// [`FilterAst::File`] never matches here; file filters are resolved by the
/// directory encoder before any packet is read.
pub fn match_filter(ast: &FilterAst, view: &HeaderView, ts_us: u64) -> bool {
    match ast {
        FilterAst::File(_) => false,
        FilterAst::Bpf(p) => match_predicate(p, view),
        FilterAst::TimeWindow(w) => w.contains(ts_us),
        FilterAst::And(p, w) => w.contains(ts_us) && match_predicate(p, view),
    }
}

/// Absent header fields make a primitive false.
pub fn match_predicate(pred: &Predicate, view: &HeaderView) -> bool {
    match pred {
        Predicate::Host(a) => view.src_ip == Some(*a) || view.dst_ip == Some(*a),
        Predicate::SrcHost(a) => view.src_ip == Some(*a),
        Predicate::DstHost(a) => view.dst_ip == Some(*a),
        Predicate::Net(c) => view.src_ip.is_some_and(|ip| c.contains(ip)) || view.dst_ip.is_some_and(|ip| c.contains(ip)),
        Predicate::Port(p) => view.src_port == Some(*p) || view.dst_port == Some(*p),
        Predicate::SrcPort(p) => view.src_port == Some(*p),
        Predicate::DstPort(p) => view.dst_port == Some(*p),
        Predicate::Proto(Proto::Tcp) => view.ip_proto == Some(IPPROTO_TCP),
        Predicate::Proto(Proto::Udp) => view.ip_proto == Some(IPPROTO_UDP),
        Predicate::Proto(Proto::Icmp) => view.ether_type == Some(ETHERTYPE_IPV4) && view.ip_proto == Some(IPPROTO_ICMP),
        Predicate::Proto(Proto::Ip) => view.ether_type == Some(ETHERTYPE_IPV4),
        Predicate::Proto(Proto::Ip6) => view.ether_type == Some(ETHERTYPE_IPV6),
        Predicate::And(a, b) => match_predicate(a, view) && match_predicate(b, view),
        Predicate::Or(a, b) => match_predicate(a, view) || match_predicate(b, view),
        Predicate::Not(a) => !match_predicate(a, view),
    }
}
