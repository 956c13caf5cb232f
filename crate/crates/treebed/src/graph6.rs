//! graph6 text format: compact encoding of undirected graphs, one per line.
//! Upper-triangle bits in column order, six bits per printable byte.

use crate::graph::{Graph, GraphBuilder};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Graph6Error {
    #[error("empty input")]
    Empty,
    #[error("byte {byte:#04x} at offset {offset} outside graph6 range 63..=126")]
    BadByte { offset: usize, byte: u8 },
    #[error("truncated header at offset {offset}")]
    TruncatedHeader { offset: usize },
    #[error("bit string truncated: need {need} bytes after header, got {got}")]
    TruncatedBits { need: usize, got: usize },
    #[error("trailing bytes after offset {offset}")]
    TrailingBytes { offset: usize },
    #[error("order {0} too large for this build")]
    TooLarge(u64),
}

const HEADER: &str = ">>graph6<<";

fn check_byte(b: u8, offset: usize) -> Result<u64, Graph6Error> {
    if !(63..=126).contains(&b) {
        return Err(Graph6Error::BadByte { offset, byte: b });
    }
    Ok((b - 63) as u64)
}

/// Decodes one graph6 line (optionally prefixed by the standard header).
pub fn decode(line: &str) -> Result<Graph, Graph6Error> {
    let line = line.trim_end_matches(['\n', '\r']);
    let line = line.strip_prefix(HEADER).unwrap_or(line);
    let bytes = line.as_bytes();
    if bytes.is_empty() {
        return Err(Graph6Error::Empty);
    }
    // Order field: 1, 4 or 8 bytes.
    let (n, pos) = if bytes[0] == 126 {
        if bytes.len() >= 2 && bytes[1] == 126 {
            if bytes.len() < 8 {
                return Err(Graph6Error::TruncatedHeader { offset: bytes.len() });
            }
            let mut n = 0u64;
            for (i, &b) in bytes[2..8].iter().enumerate() {
                n = n << 6 | check_byte(b, 2 + i)?;
            }
            (n, 8)
        } else {
            if bytes.len() < 4 {
                return Err(Graph6Error::TruncatedHeader { offset: bytes.len() });
            }
            let mut n = 0u64;
            for (i, &b) in bytes[1..4].iter().enumerate() {
                n = n << 6 | check_byte(b, 1 + i)?;
            }
            (n, 4)
        }
    } else {
        (check_byte(bytes[0], 0)?, 1)
    };
    if n > 100_000 {
        return Err(Graph6Error::TooLarge(n));
    }
    let n = n as usize;
    let nbits = n * n.saturating_sub(1) / 2;
    let need = nbits.div_ceil(6);
    let got = bytes.len() - pos;
    if got < need {
        return Err(Graph6Error::TruncatedBits { need, got });
    }
    if got > need {
        return Err(Graph6Error::TrailingBytes { offset: pos + need });
    }
    let mut b = GraphBuilder::new(n);
    let mut bit_idx = 0usize;
    'outer: for j in 1..n {
        for i in 0..j {
            let byte = check_byte(bytes[pos + bit_idx / 6], pos + bit_idx / 6)?;
            let bit = byte >> (5 - bit_idx % 6) & 1;
            if bit == 1 {
                b.add_edge(i, j).unwrap();
            }
            bit_idx += 1;
            if bit_idx >= nbits {
                break 'outer;
            }
        }
    }
    Ok(b.build())
}

/// Canonical graph6 encoding (shortest order field, upper-triangle order).
pub fn encode(g: &Graph) -> String {
    let n = g.n();
    let mut out = Vec::new();
    if n <= 62 {
        out.push(n as u8 + 63);
    } else if n <= 258_047 {
        out.push(126);
        for shift in [12u32, 6, 0] {
            out.push(((n >> shift) & 0x3f) as u8 + 63);
        }
    } else {
        out.push(126);
        out.push(126);
        for shift in [30u32, 24, 18, 12, 6, 0] {
            out.push(((n >> shift) & 0x3f) as u8 + 63);
        }
    }
    let nbits = n * n.saturating_sub(1) / 2;
    let mut acc = 0u8;
    let mut filled = 0u8;
    let mut emitted = 0usize;
    for j in 1..n {
        for i in 0..j {
            acc <<= 1;
            if g.has_edge(i, j) {
                acc |= 1;
            }
            filled += 1;
            emitted += 1;
            if filled == 6 {
                out.push(acc + 63);
                acc = 0;
                filled = 0;
            }
        }
    }
    if filled > 0 {
        acc <<= 6 - filled;
        out.push(acc + 63);
    }
    debug_assert_eq!(emitted, nbits);
    String::from_utf8(out).unwrap()
}

/// Reads a multi-line graph6 file; blank lines and a leading format header
/// are tolerated. Returns one graph per remaining line.
pub fn decode_file(text: &str) -> Result<Vec<Graph>, Graph6Error> {
    text.lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .map(decode)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, random_gnp};

    #[test]
    fn spec_examples() {
        // "D?{" is the 5-vertex star centered at vertex 4, and round-trips.
        let g = decode("D?{").unwrap();
        assert_eq!(g.n(), 5);
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.degree(4), 4);
        assert_eq!(encode(&g), "D?{");

        // K3 round-trips.
        let k3 = complete(3);
        assert_eq!(decode(&encode(&k3)).unwrap().edge_count(), 3);

        // "@" is the 1-vertex empty graph.
        let g = decode("@").unwrap();
        assert_eq!((g.n(), g.edge_count()), (1, 0));
    }

    #[test]
    fn header_tolerated() {
        let g = decode(">>graph6<<D?{").unwrap();
        assert_eq!(g.n(), 5);
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(decode("").unwrap_err(), Graph6Error::Empty);
        match decode("D?") {
            Err(Graph6Error::TruncatedBits { need, got }) => {
                assert_eq!((need, got), (2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        match decode("D\x1f{") {
            Err(Graph6Error::BadByte { offset, .. }) => assert_eq!(offset, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            decode("D?{?"),
            Err(Graph6Error::TrailingBytes { .. })
        ));
    }

    #[test]
    fn long_form_order() {
        // 63 vertices forces the 4-byte order field.
        let g = crate::graph::path(63);
        let enc = encode(&g);
        assert_eq!(enc.as_bytes()[0], 126);
        let back = decode(&enc).unwrap();
        assert_eq!(back.n(), 63);
        assert_eq!(back.edge_count(), 62);
    }

    #[test]
    fn roundtrip_random_graphs() {
        // decode . encode = identity over 1000 random graphs up to n = 62.
        for seed in 0..1000u64 {
            let n = 1 + (seed % 62) as usize;
            let p = 0.1 + 0.8 * ((seed % 9) as f64) / 8.0;
            let g = random_gnp(n, p, seed);
            let enc = encode(&g);
            let h = decode(&enc).unwrap();
            assert_eq!(h.n(), g.n());
            assert_eq!(h.edge_count(), g.edge_count());
            assert_eq!(encode(&h), enc, "seed {seed}");
            assert!(h.check_invariants());
        }
    }
}
