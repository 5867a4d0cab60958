//! Hidden-state container: `HSV1`, u32 count, then per response u32 L,
//! u32 D and L·D little-endian f32 activations in row-major order.

use std::path::Path;

use thiserror::Error;

use super::HiddenStateMatrix;

const MAGIC: &[u8; 4] = b"HSV1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HiddenStateError {
    #[error("format error at byte {offset}: {message}")]
    FormatError { offset: usize, message: String },
    #[error("file ends at byte {len}, inside a record starting at byte {offset}")]
    TruncatedFile { offset: usize, len: usize },
    #[error("bad matrix: {0}")]
    Shape(String),
    #[error("{0}")]
    Io(String),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    record: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> Result<u32, HiddenStateError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn take(&mut self, n: usize) -> Result<&[u8], HiddenStateError> {
        if self.bytes.len() - self.pos < n {
            return Err(HiddenStateError::TruncatedFile {
                offset: self.record,
                len: self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

fn format_error(offset: usize, message: impl Into<String>) -> HiddenStateError {
    HiddenStateError::FormatError {
        offset,
        message: message.into(),
    }
}

pub fn parse_hidden_states(bytes: &[u8]) -> Result<Vec<HiddenStateMatrix>, HiddenStateError> {
    let mut r = Reader { bytes, pos: 0, record: 0 };
    if r.take(4)? != MAGIC {
        return Err(format_error(0, "missing HSV1 magic"));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    let mut first_dim = None;
    for i in 0..count {
        r.record = r.pos;
        let l_at = r.pos;
        let l = r.u32()? as usize;
        let d_at = r.pos;
        let d = r.u32()? as usize;
        if l == 0 {
            return Err(format_error(l_at, format!("response {i} has zero tokens")));
        }
        if d == 0 {
            return Err(format_error(d_at, format!("response {i} has zero dimensions")));
        }
        if *first_dim.get_or_insert(d) != d {
            return Err(format_error(d_at, format!("response {i} has dimension {d}, earlier ones {}", first_dim.unwrap())));
        }
        // A length that cannot fit in the whole file is a damaged header,
        // not a file cut short.
        let payload = l.checked_mul(d).and_then(|n| n.checked_mul(4));
        match payload {
            Some(p) if p <= bytes.len() => {}
            _ => return Err(format_error(l_at, format!("{l}x{d} record cannot fit in a {}-byte file", bytes.len()))),
        }
        let values_at = r.pos;
        let raw = r.take(l * d * 4)?;
        let mut values = Vec::with_capacity(l * d);
        for (k, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(format_error(values_at + 4 * k, "non-finite activation"));
            }
            values.push(v as f64);
        }
        out.push(HiddenStateMatrix::new(l, d, values)?);
    }
    if r.pos != bytes.len() {
        return Err(format_error(r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(out)
}

pub fn load_hidden_states(path: &Path) -> Result<Vec<HiddenStateMatrix>, HiddenStateError> {
    let bytes = std::fs::read(path).map_err(|e| HiddenStateError::Io(format!("{}: {e}", path.display())))?;
    parse_hidden_states(&bytes)
}

/// Inverse of [`parse_hidden_states`]; activations are narrowed to f32.
pub fn encode_hidden_states(matrices: &[HiddenStateMatrix]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(matrices.len() as u32).to_le_bytes());
    for m in matrices {
        out.extend_from_slice(&(m.tokens() as u32).to_le_bytes());
        out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
        for v in m.activations() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<HiddenStateMatrix> {
        (0..2)
            .map(|k| {
                let vals = (0..12).map(|i| (i + 100 * k) as f64 * 0.25).collect();
                HiddenStateMatrix::new(3, 4, vals).unwrap()
            })
            .collect()
    }

    #[test]
    fn round_trip_shapes_and_values() {
        let bytes = encode_hidden_states(&sample());
        assert_eq!(bytes.len(), 8 + 2 * (8 + 48));
        let back = parse_hidden_states(&bytes).unwrap();
        assert_eq!(back, sample());
        assert_eq!((back[1].tokens(), back[1].dim()), (3, 4));
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert_eq!(parse_hidden_states(b"HSV1\0\0\0\0").unwrap(), vec![]);
    }

    #[test]
    fn corrupted_length_header_reports_its_offset() {
        let good = encode_hidden_states(&sample());
        // Second record's L field starts at 8 + 56.
        let at = 8 + 56;
        for byte in 1..4 {
            let mut bad = good.clone();
            bad[at + byte] = 0xff;
            match parse_hidden_states(&bad) {
                Err(HiddenStateError::FormatError { offset, .. }) => assert_eq!(offset, at),
                other => panic!("byte {byte}: {other:?}"),
            }
        }
        let mut zero = good.clone();
        zero[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            parse_hidden_states(&zero),
            Err(HiddenStateError::FormatError { offset: 8, .. })
        ));
    }

    #[test]
    fn truncation_and_magic() {
        let good = encode_hidden_states(&sample());
        assert!(matches!(
            parse_hidden_states(&good[..good.len() - 3]),
            Err(HiddenStateError::TruncatedFile { offset: 64, .. })
        ));
        assert!(matches!(
            parse_hidden_states(&good[..6]),
            Err(HiddenStateError::TruncatedFile { .. })
        ));
        assert!(matches!(
            parse_hidden_states(b"HSV2\0\0\0\0"),
            Err(HiddenStateError::FormatError { offset: 0, .. })
        ));
        let mut extra = good.clone();
        extra.push(0);
        assert!(matches!(
            parse_hidden_states(&extra),
            Err(HiddenStateError::FormatError { offset, .. }) if offset == good.len()
        ));
    }
}
