//! Traffic filters: a tcpdump-style predicate subset, timestamp windows,
//! file references, and the conjunction of a predicate with a window.
//!
//! Supported predicate grammar (keywords are case-insensitive):
//!
//! ```text
//! expr      := and_expr ( ("or" | "||") and_expr )*
//! and_expr  := term ( ("and" | "&&") term )*
//! term      := ("not" | "!") term | "(" expr ")" | primitive
//! primitive := ["src" | "dst"] "host" ADDR
//!            | "net" ADDR ["/" LEN]
//!            | ["src" | "dst"] "port" NUM
//!            | "tcp" | "udp" | "icmp" | "ip" | "ip6"
//! ```

mod eval;
mod parser;

use std::fmt;
use std::net::IpAddr;

pub use eval::{match_filter, match_predicate};
pub use parser::{parse_epoch_seconds, parse_filter, parse_predicate, SyntaxError, SyntaxErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Proto {
    Tcp,
    Udp,
    Icmp,
    Ip,
    Ip6,
}

impl Proto {
    pub fn keyword(self) -> &'static str {
        match self {
            Proto::Tcp => "tcp",
            Proto::Udp => "udp",
            Proto::Icmp => "icmp",
            Proto::Ip => "ip",
            Proto::Ip6 => "ip6",
        }
    }
}

/// Network prefix with host bits cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cidr {
    addr: IpAddr,
    prefix: u8,
}

impl Cidr {
    /// Returns `None` when `prefix` exceeds the address width.
    pub fn new(addr: IpAddr, prefix: u8) -> Option<Self> {
        let masked = match addr {
            IpAddr::V4(a) if prefix <= 32 => {
                let mask = u32::MAX.checked_shl(32 - prefix as u32).unwrap_or(0);
                IpAddr::V4((u32::from(a) & mask).into())
            }
            IpAddr::V6(a) if prefix <= 128 => {
                let mask = u128::MAX.checked_shl(128 - prefix as u32).unwrap_or(0);
                IpAddr::V6((u128::from(a) & mask).into())
            }
            _ => return None,
        };
        Some(Cidr { addr: masked, prefix })
    }

    pub fn addr(&self) -> IpAddr {
        self.addr
    }

    pub fn prefix(&self) -> u8 {
        self.prefix
    }

    pub fn contains(&self, ip: IpAddr) -> bool {
        Cidr::new(ip, self.prefix).is_some_and(|c| c.addr == self.addr)
    }
}

impl fmt::Display for Cidr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.prefix)
    }
}

/// Header predicate tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    /// Source or destination address.
    Host(IpAddr),
    SrcHost(IpAddr),
    DstHost(IpAddr),
    /// Source or destination inside the prefix.
    Net(Cidr),
    /// Source or destination port (TCP/UDP only).
    Port(u16),
    SrcPort(u16),
    DstPort(u16),
    Proto(Proto),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn and(a: Predicate, b: Predicate) -> Self {
        Predicate::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Predicate, b: Predicate) -> Self {
        Predicate::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Predicate) -> Self {
        Predicate::Not(Box::new(a))
    }

    pub fn depth(&self) -> usize {
        match self {
            Predicate::And(a, b) | Predicate::Or(a, b) => 1 + a.depth().max(b.depth()),
            Predicate::Not(a) => 1 + a.depth(),
            _ => 1,
        }
    }
}

/// Renders with full parenthesization so the output re-parses to the same tree.
impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Host(a) => write!(f, "host {a}"),
            Predicate::SrcHost(a) => write!(f, "src host {a}"),
            Predicate::DstHost(a) => write!(f, "dst host {a}"),
            Predicate::Net(c) => write!(f, "net {c}"),
            Predicate::Port(p) => write!(f, "port {p}"),
            Predicate::SrcPort(p) => write!(f, "src port {p}"),
            Predicate::DstPort(p) => write!(f, "dst port {p}"),
            Predicate::Proto(p) => f.write_str(p.keyword()),
            Predicate::And(a, b) => write!(f, "({a} and {b})"),
            Predicate::Or(a, b) => write!(f, "({a} or {b})"),
            Predicate::Not(a) => write!(f, "not {a}"),
        }
    }
}

/// Inclusive microsecond window; either bound may be open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TimeWindow {
    start_us: Option<u64>,
    end_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("time window start {start_us} is after end {end_us}")]
pub struct InvertedWindow {
    pub start_us: u64,
    pub end_us: u64,
}

impl TimeWindow {
    pub fn new(start_us: Option<u64>, end_us: Option<u64>) -> Result<Self, InvertedWindow> {
        if let (Some(start_us), Some(end_us)) = (start_us, end_us) {
            if start_us > end_us {
                return Err(InvertedWindow { start_us, end_us });
            }
        }
        Ok(TimeWindow { start_us, end_us })
    }

    pub fn start_us(&self) -> Option<u64> {
        self.start_us
    }

    pub fn end_us(&self) -> Option<u64> {
        self.end_us
    }

    pub fn contains(&self, ts_us: u64) -> bool {
        self.start_us.is_none_or(|s| ts_us >= s) && self.end_us.is_none_or(|e| ts_us <= e)
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bound = |b: Option<u64>| b.map(|us| format!("{}.{:06}", us / 1_000_000, us % 1_000_000)).unwrap_or_default();
        write!(f, "{}-{}", bound(self.start_us), bound(self.end_us))
    }
}

/// A traffic filter as it appears in a metadata file.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FilterAst {
    /// All packets of one capture file; resolved by the directory encoder.
    File(String),
    Bpf(Predicate),
    TimeWindow(TimeWindow),
    And(Predicate, TimeWindow),
}

impl FilterAst {
    pub fn is_file(&self) -> bool {
        matches!(self, FilterAst::File(_))
    }
}

impl fmt::Display for FilterAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterAst::File(path) => write!(f, "FILE:{path}"),
            FilterAst::Bpf(p) => write!(f, "BPF:{p}"),
            FilterAst::TimeWindow(w) => write!(f, "TS:{w}"),
            FilterAst::And(p, w) => write!(f, "BPF:{p} && TS:{w}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cidr_masks_host_bits() {
        let c = Cidr::new("10.1.2.3".parse().unwrap(), 8).unwrap();
        assert_eq!(c.to_string(), "10.0.0.0/8");
        assert!(c.contains("10.200.0.1".parse().unwrap()));
        assert!(!c.contains("11.0.0.1".parse().unwrap()));
        assert!(!c.contains("::1".parse().unwrap()));
        assert!(Cidr::new("10.0.0.0".parse().unwrap(), 33).is_none());
        assert!(Cidr::new("::".parse().unwrap(), 0).unwrap().contains("2001:db8::1".parse().unwrap()));
    }

    #[test]
    fn window_bounds_inclusive() {
        let w = TimeWindow::new(Some(100_000_000), Some(200_000_000)).unwrap();
        assert!(w.contains(100_000_000));
        assert!(w.contains(200_000_000));
        assert!(!w.contains(200_000_001));
        assert!(!w.contains(99_999_999));
        assert!(TimeWindow::new(None, Some(5)).unwrap().contains(0));
        assert!(TimeWindow::new(Some(5), None).unwrap().contains(u64::MAX));
        assert!(TimeWindow::new(Some(6), Some(5)).is_err());
        assert_eq!(w.to_string(), "100.000000-200.000000");
    }
}
