use std::fmt;
use std::net::IpAddr;

use super::{Cidr, FilterAst, Predicate, Proto};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyntaxErrorKind {
    Empty,
    UnexpectedToken(String),
    UnexpectedEnd,
    UnbalancedParens,
    PortOutOfRange(String),
    BadAddress(String),
    BadPrefix(String),
    BadTimestamp(String),
}

impl fmt::Display for SyntaxErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntaxErrorKind::Empty => f.write_str("empty expression"),
            SyntaxErrorKind::UnexpectedToken(t) => write!(f, "unexpected token `{t}`"),
            SyntaxErrorKind::UnexpectedEnd => f.write_str("unexpected end of expression"),
            SyntaxErrorKind::UnbalancedParens => f.write_str("unbalanced parentheses"),
            SyntaxErrorKind::PortOutOfRange(t) => write!(f, "port `{t}` is not in 0..=65535"),
            SyntaxErrorKind::BadAddress(t) => write!(f, "bad address literal `{t}`"),
            SyntaxErrorKind::BadPrefix(t) => write!(f, "bad network prefix `{t}`"),
            SyntaxErrorKind::BadTimestamp(t) => write!(f, "bad timestamp `{t}`"),
        }
    }
}

/// Parse failure with the character position where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at position {position}: {kind}")]
pub struct SyntaxError {
    pub position: usize,
    pub kind: SyntaxErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok<'a> {
    Open,
    Close,
    Word(&'a str),
}

fn tokenize(expr: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let mut chars = expr.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                out.push((i, Tok::Open));
                chars.next();
            }
            ')' => {
                out.push((i, Tok::Close));
                chars.next();
            }
            '!' => {
                out.push((i, Tok::Word(&expr[i..i + 1])));
                chars.next();
            }
            '&' | '|' if expr[i + 1..].starts_with(c) => {
                out.push((i, Tok::Word(&expr[i..i + 2])));
                chars.next();
                chars.next();
            }
            _ => {
                let mut end = expr.len();
                while let Some(&(j, c)) = chars.peek() {
                    if j != i && (c.is_whitespace() || matches!(c, '(' | ')' | '!' | '&' | '|')) {
                        end = j;
                        break;
                    }
                    chars.next();
                }
                out.push((i, Tok::Word(&expr[i..end])));
            }
        }
    }
    out
}

struct Parser<'a> {
    tokens: Vec<(usize, Tok<'a>)>,
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, position: usize, kind: SyntaxErrorKind) -> Result<T, SyntaxError> {
        Err(SyntaxError { position, kind })
    }

    fn peek(&self) -> Option<&(usize, Tok<'a>)> {
        self.tokens.get(self.pos)
    }

    fn peek_keyword(&self, words: &[&str]) -> bool {
        matches!(self.peek(), Some((_, Tok::Word(w))) if words.iter().any(|k| w.eq_ignore_ascii_case(k)))
    }

    fn next_word(&mut self) -> Result<(usize, &'a str), SyntaxError> {
        match self.tokens.get(self.pos).cloned() {
            Some((at, Tok::Word(w))) => {
                self.pos += 1;
                Ok((at, w))
            }
            Some((at, Tok::Open)) => self.err(at, SyntaxErrorKind::UnexpectedToken("(".into())),
            Some((at, Tok::Close)) => self.err(at, SyntaxErrorKind::UnbalancedParens),
            None => self.err(self.len, SyntaxErrorKind::UnexpectedEnd),
        }
    }

    fn expr(&mut self) -> Result<Predicate, SyntaxError> {
        let mut lhs = self.and_expr()?;
        while self.peek_keyword(&["or", "||"]) {
            self.pos += 1;
            lhs = Predicate::or(lhs, self.and_expr()?);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Predicate, SyntaxError> {
        let mut lhs = self.term()?;
        while self.peek_keyword(&["and", "&&"]) {
            self.pos += 1;
            lhs = Predicate::and(lhs, self.term()?);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Predicate, SyntaxError> {
        match self.peek().cloned() {
            Some((_, Tok::Open)) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some((_, Tok::Close)) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    Some((at, Tok::Word(w))) => self.err(*at, SyntaxErrorKind::UnexpectedToken(w.to_string())),
                    _ => self.err(self.len, SyntaxErrorKind::UnbalancedParens),
                }
            }
            Some((at, Tok::Close)) => self.err(at, SyntaxErrorKind::UnbalancedParens),
            Some(_) if self.peek_keyword(&["not", "!"]) => {
                self.pos += 1;
                Ok(Predicate::not(self.term()?))
            }
            Some(_) => self.primitive(),
            None => self.err(self.len, SyntaxErrorKind::UnexpectedEnd),
        }
    }

    fn primitive(&mut self) -> Result<Predicate, SyntaxError> {
        let (at, word) = self.next_word()?;
        let lower = word.to_ascii_lowercase();
        let proto = match lower.as_str() {
            "tcp" => Some(Proto::Tcp),
            "udp" => Some(Proto::Udp),
            "icmp" => Some(Proto::Icmp),
            "ip" => Some(Proto::Ip),
            "ip6" => Some(Proto::Ip6),
            _ => None,
        };
        if let Some(p) = proto {
            return Ok(Predicate::Proto(p));
        }
        match lower.as_str() {
            "src" | "dst" => {
                let (kat, kind) = self.next_word()?;
                let src = lower == "src";
                match kind.to_ascii_lowercase().as_str() {
                    "host" => {
                        let addr = self.address()?;
                        Ok(if src { Predicate::SrcHost(addr) } else { Predicate::DstHost(addr) })
                    }
                    "port" => {
                        let port = self.port()?;
                        Ok(if src { Predicate::SrcPort(port) } else { Predicate::DstPort(port) })
                    }
                    _ => self.err(kat, SyntaxErrorKind::UnexpectedToken(kind.to_string())),
                }
            }
            "host" => Ok(Predicate::Host(self.address()?)),
            "port" => Ok(Predicate::Port(self.port()?)),
            "net" => self.cidr(),
            _ => self.err(at, SyntaxErrorKind::UnexpectedToken(word.to_string())),
        }
    }

    fn address(&mut self) -> Result<IpAddr, SyntaxError> {
        let (at, word) = self.next_word()?;
        word.parse().or_else(|_| self.err(at, SyntaxErrorKind::BadAddress(word.to_string())))
    }

    fn port(&mut self) -> Result<u16, SyntaxError> {
        let (at, word) = self.next_word()?;
        if word.is_empty() || !word.bytes().all(|b| b.is_ascii_digit()) {
            return self.err(at, SyntaxErrorKind::UnexpectedToken(word.to_string()));
        }
        word.parse().or_else(|_| self.err(at, SyntaxErrorKind::PortOutOfRange(word.to_string())))
    }

    fn cidr(&mut self) -> Result<Predicate, SyntaxError> {
        let (at, word) = self.next_word()?;
        let (addr_text, prefix_text) = match word.split_once('/') {
            Some((a, p)) => (a, Some(p)),
            None => (word, None),
        };
        let addr: IpAddr = addr_text.parse().or_else(|_| self.err(at, SyntaxErrorKind::BadAddress(addr_text.to_string())))?;
        let full = if addr.is_ipv4() { 32 } else { 128 };
        let prefix = match prefix_text {
            None => full,
            Some(p) => p.parse::<u8>().ok().filter(|&v| v <= full)
                .map_or_else(|| self.err(at, SyntaxErrorKind::BadPrefix(p.to_string())), Ok)?,
        };
        Ok(Predicate::Net(Cidr::new(addr, prefix).expect("prefix checked")))
    }
}

/// Parses a predicate expression into the [`FilterAst::Bpf`] variant.
pub fn parse_filter(expr: &str) -> Result<FilterAst, SyntaxError> {
    parse_predicate(expr).map(FilterAst::Bpf)
}

/// Parses a bare predicate expression.
pub fn parse_predicate(expr: &str) -> Result<Predicate, SyntaxError> {
    let tokens = tokenize(expr);
    if tokens.is_empty() {
        return Err(SyntaxError { position: 0, kind: SyntaxErrorKind::Empty });
    }
    let mut parser = Parser { tokens, pos: 0, len: expr.len() };
    let pred = parser.expr()?;
    match parser.peek() {
        None => Ok(pred),
        Some((at, Tok::Close)) => parser.err(*at, SyntaxErrorKind::UnbalancedParens),
        Some((at, Tok::Open)) => parser.err(*at, SyntaxErrorKind::UnexpectedToken("(".into())),
        Some((at, Tok::Word(w))) => parser.err(*at, SyntaxErrorKind::UnexpectedToken(w.to_string())),
    }
}

/// Parses Unix epoch seconds with an optional fraction into microseconds.
/// Digits past the sixth fractional place are truncated.
pub fn parse_epoch_seconds(text: &str) -> Result<u64, SyntaxError> {
    let bad = || SyntaxError { position: 0, kind: SyntaxErrorKind::BadTimestamp(text.to_string()) };
    let text = text.trim();
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if whole.is_empty() || !digits(whole) || !digits(frac) {
        return Err(bad());
    }
    let secs: u64 = whole.parse().map_err(|_| bad())?;
    let mut micros = 0u64;
    for i in 0..6 {
        micros = micros * 10 + frac.as_bytes().get(i).map_or(0, |b| (b - b'0') as u64);
    }
    secs.checked_mul(1_000_000).and_then(|s| s.checked_add(micros)).ok_or_else(bad)
}
