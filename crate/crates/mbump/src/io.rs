//! Fields on disk. `MWF1` holds a matrix weight as little-endian lower
//! triangles, cell-major, after a fixed header; `MWS1` is the same layout
//! for scalar fields (operator outputs). Both have a JSON mirror, chosen by
//! the `.json` extension. All four encodings round-trip bit-exactly.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mbump_core::dyadic::Lattice;
use mbump_core::linalg::Mat;
use mbump_core::weights::WeightField;
use serde::{Deserialize, Serialize};

const FIELD_MAGIC: [u8; 4] = *b"MWF1";
const SCALAR_MAGIC: [u8; 4] = *b"MWS1";
const HEADER_LEN: usize = 4 + 3 * 4 + 8;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected}")]
    Magic { found: String, expected: &'static str },
    #[error("file is {got} bytes, header implies {expected}")]
    Length { got: usize, expected: usize },
    #[error("invalid header: {0}")]
    Header(String),
    #[error("format tag {found:?}, expected {expected}")]
    Tag { found: String, expected: &'static str },
}

struct Header {
    lat: Lattice,
    n: usize,
}

fn put_header(out: &mut Vec<u8>, magic: [u8; 4], lat: &Lattice, n: usize) {
    out.extend_from_slice(&magic);
    out.extend_from_slice(&(lat.d as u32).to_le_bytes());
    out.extend_from_slice(&lat.level.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&lat.side.to_le_bytes());
}

fn take_header(bytes: &[u8], magic: [u8; 4], name: &'static str) -> Result<Header, FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Length { got: bytes.len(), expected: HEADER_LEN });
    }
    if bytes[..4] != magic {
        return Err(FormatError::Magic { found: String::from_utf8_lossy(&bytes[..4]).into_owned(), expected: name });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let side = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let lat = Lattice::with_side(word(0) as usize, word(1), side).map_err(|e| FormatError::Header(e.to_string()))?;
    Ok(Header { lat, n: word(2) as usize })
}

fn take_values(bytes: &[u8], count: usize) -> Result<Vec<f64>, FormatError> {
    let expected = HEADER_LEN + 8 * count;
    if bytes.len() != expected {
        return Err(FormatError::Length { got: bytes.len(), expected });
    }
    Ok(bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn lower_triangles(w: &WeightField) -> Vec<f64> {
    let n = w.n();
    let mut out = Vec::with_capacity(w.cells().len() * n * (n + 1) / 2);
    for m in w.cells() {
        for i in 0..n {
            for j in 0..=i {
                out.push(m.get(i, j));
            }
        }
    }
    out
}

pub fn encode_field(w: &WeightField) -> Vec<u8> {
    let lower = lower_triangles(w);
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * lower.len());
    put_header(&mut out, FIELD_MAGIC, w.lattice(), w.n());
    for v in lower {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<WeightField> {
    let h = take_header(bytes, FIELD_MAGIC, "MWF1")?;
    if h.n == 0 || h.n > mbump_core::linalg::MAX_N {
        return Err(FormatError::Header(format!("matrix dimension {}", h.n)).into());
    }
    let values = take_values(bytes, h.lat.num_cells() * h.n * (h.n + 1) / 2)?;
    Ok(WeightField::from_lower(h.lat, h.n, &values)?)
}

/// JSON mirror of `MWF1`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldJson {
    format: String,
    d: usize,
    level: u32,
    n: usize,
    side: f64,
    lower: Vec<f64>,
}

pub fn field_to_json(w: &WeightField) -> Result<String> {
    let lat = w.lattice();
    let doc = FieldJson { format: "MWF1".into(), d: lat.d, level: lat.level, n: w.n(), side: lat.side, lower: lower_triangles(w) };
    Ok(serde_json::to_string(&doc)? + "\n")
}

pub fn field_from_json(text: &str) -> Result<WeightField> {
    let doc: FieldJson = serde_json::from_str(text)?;
    if doc.format != "MWF1" {
        return Err(FormatError::Tag { found: doc.format, expected: "MWF1" }.into());
    }
    let lat = Lattice::with_side(doc.d, doc.level, doc.side)?;
    Ok(WeightField::from_lower(lat, doc.n, &doc.lower)?)
}

/// A scalar field with its lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub lat: Lattice,
    pub values: Vec<f64>,
}

pub fn encode_scalar(f: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * f.values.len());
    put_header(&mut out, SCALAR_MAGIC, &f.lat, 1);
    for v in &f.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_scalar(bytes: &[u8]) -> Result<ScalarField> {
    let h = take_header(bytes, SCALAR_MAGIC, "MWS1")?;
    if h.n != 1 {
        return Err(FormatError::Header(format!("scalar file with {} components", h.n)).into());
    }
    let values = take_values(bytes, h.lat.num_cells())?;
    Ok(ScalarField { lat: h.lat, values })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalarJson {
    format: String,
    d: usize,
    level: u32,
    side: f64,
    values: Vec<f64>,
}

pub fn scalar_to_json(f: &ScalarField) -> Result<String> {
    let doc = ScalarJson { format: "MWS1".into(), d: f.lat.d, level: f.lat.level, side: f.lat.side, values: f.values.clone() };
    Ok(serde_json::to_string(&doc)? + "\n")
}

pub fn scalar_from_json(text: &str) -> Result<ScalarField> {
    let doc: ScalarJson = serde_json::from_str(text)?;
    if doc.format != "MWS1" {
        return Err(FormatError::Tag { found: doc.format, expected: "MWS1" }.into());
    }
    let lat = Lattice::with_side(doc.d, doc.level, doc.side)?;
    if doc.values.len() != lat.num_cells() {
        return Err(FormatError::Length { got: doc.values.len(), expected: lat.num_cells() }.into());
    }
    Ok(ScalarField { lat, values: doc.values })
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn read_field(path: &Path) -> Result<WeightField> {
    let ctx = || format!("reading weight field {}", path.display());
    if is_json(path) {
        field_from_json(&fs::read_to_string(path).with_context(ctx)?).with_context(ctx)
    } else {
        decode_field(&fs::read(path).with_context(ctx)?).with_context(ctx)
    }
}

pub fn write_field(path: &Path, w: &WeightField) -> Result<()> {
    let bytes = if is_json(path) { field_to_json(w)?.into_bytes() } else { encode_field(w) };
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_scalar(path: &Path) -> Result<ScalarField> {
    let ctx = || format!("reading scalar field {}", path.display());
    if is_json(path) {
        scalar_from_json(&fs::read_to_string(path).with_context(ctx)?).with_context(ctx)
    } else {
        decode_scalar(&fs::read(path).with_context(ctx)?).with_context(ctx)
    }
}

pub fn write_scalar(path: &Path, f: &ScalarField) -> Result<()> {
    let bytes = if is_json(path) { scalar_to_json(f)?.into_bytes() } else { encode_scalar(f) };
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// A vector function for `apply`, stored as JSON.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorJson {
    pub n: usize,
    pub values: Vec<f64>,
}

/// Exact copies of the cells, used by tests.
pub fn same_bits(a: &WeightField, b: &WeightField) -> bool {
    let bits = |m: &Mat, n: usize| (0..n * n).map(|k| m.get(k / n, k % n).to_bits()).collect::<Vec<_>>();
    a.lattice() == b.lattice()
        && a.n() == b.n()
        && a.cells().iter().zip(b.cells()).all(|(x, y)| bits(x, a.n()) == bits(y, a.n()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mbump_core::weights::gen_random_field;

    fn field() -> WeightField {
        gen_random_field(Lattice::with_side(2, 3, 2.5).unwrap(), 3, 11, 30.0, 0.7).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let w = field();
        let bytes = encode_field(&w);
        assert_eq!(&bytes[..4], b"MWF1");
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 64 * 6);
        assert!(same_bits(&w, &decode_field(&bytes).unwrap()));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let w = field();
        assert!(same_bits(&w, &field_from_json(&field_to_json(&w).unwrap()).unwrap()));
        let s = ScalarField { lat: *w.lattice(), values: w.op_norms() };
        assert_eq!(decode_scalar(&encode_scalar(&s)).unwrap(), s);
        let back = scalar_from_json(&scalar_to_json(&s).unwrap()).unwrap();
        assert!(back.values.iter().zip(&s.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut bytes = encode_field(&field());
        assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        let err = decode_field(&bytes).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
        let s = ScalarField { lat: Lattice::new(1, 2).unwrap(), values: vec![1.0; 4] };
        assert!(decode_field(&encode_scalar(&s)).is_err());
    }
}
