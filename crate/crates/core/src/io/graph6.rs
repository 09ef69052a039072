//! graph6 text encoding of undirected simple graphs.

use crate::error::{Error, Result};
use crate::graph::Graph;

fn err(msg: impl Into<String>) -> Error {
    Error::Graph6(msg.into())
}

fn encode_n(n: usize, out: &mut String) {
    if n <= 62 {
        out.push((n as u8 + 63) as char);
    } else if n <= 258_047 {
        out.push('~');
        for shift in [12, 6, 0] {
            out.push((((n >> shift) & 63) as u8 + 63) as char);
        }
    } else {
        out.push_str("~~");
        for shift in [30, 24, 18, 12, 6, 0] {
            out.push((((n >> shift) & 63) as u8 + 63) as char);
        }
    }
}

/// Encodes `g` as one graph6 line (no trailing newline, no `>>graph6<<`
/// header). Features and labels are not represented.
pub fn write_graph6(g: &Graph) -> String {
    let n = g.node_count();
    let mut out = String::new();
    encode_n(n, &mut out);
    let mut bits = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for j in 1..n {
        for i in 0..j {
            bits.push(g.has_edge(i, j));
        }
    }
    for chunk in bits.chunks(6) {
        let mut v = 0u8;
        for (k, &b) in chunk.iter().enumerate() {
            if b {
                v |= 1 << (5 - k);
            }
        }
        out.push((v + 63) as char);
    }
    out
}

/// Parses one graph6 line. An optional `>>graph6<<` prefix and surrounding
/// whitespace are accepted.
pub fn parse_graph6(line: &str) -> Result<Graph> {
    let line = line.trim();
    let line = line.strip_prefix(">>graph6<<").unwrap_or(line);
    let bytes = line.as_bytes();
    if let Some(pos) = bytes.iter().position(|&b| !(63..=126).contains(&b)) {
        return Err(err(format!("byte {} at position {pos} is outside 63..=126", bytes[pos])));
    }
    let digits = |s: &[u8]| s.iter().fold(0usize, |acc, &b| (acc << 6) | (b - 63) as usize);
    let (n, body) = match bytes {
        [] => return Err(err("empty input")),
        [b'~', b'~', rest @ ..] => {
            if rest.len() < 6 {
                return Err(err("truncated 8-byte size header"));
            }
            (digits(&rest[..6]), &rest[6..])
        }
        [b'~', rest @ ..] => {
            if rest.len() < 3 {
                return Err(err("truncated 4-byte size header"));
            }
            (digits(&rest[..3]), &rest[3..])
        }
        [first, rest @ ..] => ((first - 63) as usize, rest),
    };
    let nbits = n * n.saturating_sub(1) / 2;
    let need = nbits.div_ceil(6);
    if body.len() != need {
        return Err(err(format!(
            "expected {need} data bytes for {n} nodes, found {}",
            body.len()
        )));
    }
    let mut edges = Vec::new();
    let mut k = 0;
    for j in 1..n {
        for i in 0..j {
            let byte = body[k / 6] - 63;
            if byte >> (5 - k % 6) & 1 == 1 {
                edges.push((i, j));
            }
            k += 1;
        }
    }
    // padding bits must be zero
    if nbits % 6 != 0 {
        let last = body[need - 1] - 63;
        if last & ((1 << (6 - nbits % 6)) - 1) != 0 {
            return Err(err("non-zero padding bits"));
        }
    }
    Graph::from_edge_list(n, &edges, None, None)
}

/// Parses every non-empty line of a graph6 file.
pub fn parse_graph6_lines(text: &str) -> Result<Vec<Graph>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_graph6(l).map_err(|e| err(format!("line {}: {e}", i + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_encodings() {
        assert_eq!(write_graph6(&Graph::empty(1)), "@");
        assert_eq!(write_graph6(&Graph::empty(0)), "?");
        // K2: n=2 → 'A', one bit set → 0b100000 = 32 → '_'
        assert_eq!(write_graph6(&Graph::complete(2)), "A_");
        // P3 from the format description example style: edges 0-1, 1-2
        assert_eq!(write_graph6(&Graph::path(3)), "Bg");
        let k2 = parse_graph6("A_").unwrap();
        assert_eq!(k2, Graph::complete(2));
        assert_eq!(parse_graph6(">>graph6<<Bg\n").unwrap(), Graph::path(3));
    }

    #[test]
    fn extended_header() {
        let g = Graph::cycle(70);
        let s = write_graph6(&g);
        assert!(s.starts_with('~'));
        assert_eq!(parse_graph6(&s).unwrap(), g);
    }

    #[test]
    fn malformed() {
        assert!(parse_graph6("").is_err());
        assert!(parse_graph6("C").is_err());
        assert!(parse_graph6("A_x").is_err());
        assert!(parse_graph6("A\u{7f}").is_err());
        assert!(parse_graph6("A_ ").is_ok());
        assert!(parse_graph6("~??").is_err());
        assert!(parse_graph6("A`").is_err());
    }
}
