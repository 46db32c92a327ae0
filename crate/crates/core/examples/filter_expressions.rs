//! Parse filter expressions and evaluate them against a few synthetic frames.
//!
//! ```text
//! cargo run --example filter_expressions [-- "<expr>" ...]
//! ```

use pcapml::decode_headers;
use pcapml::filter::{match_filter, parse_filter};
use pcapml::synth::FlowSpec;

fn main() {
    let mut exprs: Vec<String> = std::env::args().skip(1).collect();
    if exprs.is_empty() {
        exprs = [
            "port 22",
            "src host 10.0.0.1 and (tcp or udp)",
            "icmp || ip6",
            "net 192.168.0.0/16 and not dst port 53",
            "tcp and",
            "port 70000",
        ]
        .map(String::from)
        .to_vec();
    }
    let frames = [
        ("tcp 10.0.0.1:5000 > 10.0.0.2:22", FlowSpec::tcp("10.0.0.1", "10.0.0.2", 5000, 22)),
        ("udp 192.168.1.5:4000 > 8.8.8.8:53", FlowSpec::udp("192.168.1.5", "8.8.8.8", 4000, 53)),
        ("icmp 10.0.0.1 > 10.0.0.9", FlowSpec::icmp("10.0.0.1", "10.0.0.9")),
        ("udp [2001:db8::1]:1 > [2001:db8::2]:2", FlowSpec::udp("2001:db8::1", "2001:db8::2", 1, 2)),
    ];
    for expr in &exprs {
        match parse_filter(expr) {
            Ok(ast) => {
                println!("{expr:?} parses as {ast}");
                for (name, flow) in &frames {
                    let hit = match_filter(&ast, &decode_headers(&flow.frame(80, 0), 1), 0);
                    println!("    {} {name}", if hit { "match" } else { "     " });
                }
            }
            Err(err) => println!("{expr:?}: {err}"),
        }
    }
}
