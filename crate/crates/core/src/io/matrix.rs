//! Feature matrix files.
//!
//! CSV: one metadata line `kind,frames,dims,fingerprint`, then one line per
//! frame. AFM1: 8-byte magic, frames, dims and kind id as u32 LE, then f32 LE
//! values in row-major order.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMatrix};

pub const AFM1_MAGIC: [u8; 8] = *b"AFM1\0\0\0\0";
const AFM1_HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Afm1,
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Afm1 => "afm1",
        }
    }

    /// Infers the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(MatrixFormat::Csv),
            "afm1" => Some(MatrixFormat::Afm1),
            _ => None,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MatrixFormat::Csv),
            "afm1" => Ok(MatrixFormat::Afm1),
            _ => Err(Error::invalid(format!(
                "unknown matrix format `{s}` (expected csv or afm1)"
            ))),
        }
    }
}

pub fn encode_afm1(m: &FeatureMatrix) -> Result<Vec<u8>> {
    let dim = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| Error::invalid(format!("{what} {n} does not fit the AFM1 header")))
    };
    let mut out = Vec::with_capacity(AFM1_HEADER_LEN + 4 * m.data.len());
    out.extend_from_slice(&AFM1_MAGIC);
    out.extend_from_slice(&dim(m.frames(), "frame count")?.to_le_bytes());
    out.extend_from_slice(&dim(m.dims(), "dimension")?.to_le_bytes());
    out.extend_from_slice(&m.kind.id().to_le_bytes());
    for &v in m.data.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

/// AFM1 carries no fingerprint, so the returned matrix has an empty one.
pub fn decode_afm1(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < AFM1_HEADER_LEN || bytes[..8] != AFM1_MAGIC {
        return Err(Error::MatrixParse("missing AFM1 magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (frames, dims, id) = (word(8) as usize, word(12) as usize, word(16));
    let kind = FeatureKind::from_id(id).ok_or_else(|| Error::MatrixParse(format!("unknown kind id {id}")))?;
    let expected = frames
        .checked_mul(dims)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::MatrixParse("header dimensions overflow".into()))?;
    let body = &bytes[AFM1_HEADER_LEN..];
    if body.len() != expected {
        return Err(Error::MatrixParse(format!(
            "{frames}x{dims} header needs {expected} payload bytes, found {}",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(FeatureMatrix {
        data: Array2::from_shape_vec((frames, dims), values).expect("length checked"),
        kind,
        fingerprint: String::new(),
    })
}

pub fn encode_csv(m: &FeatureMatrix) -> String {
    let mut out = String::new();
    writeln!(out, "{},{},{},{}", m.kind.key(), m.frames(), m.dims(), m.fingerprint).unwrap();
    for row in m.data.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> Result<FeatureMatrix> {
    let bad = |line: usize, msg: String| Error::MatrixParse(format!("line {line}: {msg}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 4 {
        return Err(bad(1, format!("expected kind,frames,dims,fingerprint, got `{header}`")));
    }
    let kind: FeatureKind = fields[0].parse().map_err(|e: Error| bad(1, e.to_string()))?;
    let count = |s: &str| s.trim().parse::<usize>().map_err(|e| bad(1, format!("`{s}`: {e}")));
    let (frames, dims) = (count(fields[1])?, count(fields[2])?);

    let mut values = Vec::with_capacity(frames * dims);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for cell in line.split(',') {
            values.push(
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(i + 2, format!("`{cell}`: {e}")))?,
            );
        }
        if values.len() - before != dims {
            return Err(bad(
                i + 2,
                format!("expected {dims} values, got {}", values.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != frames {
        return Err(Error::MatrixParse(format!(
            "header declares {frames} frames, found {rows}"
        )));
    }
    Ok(FeatureMatrix {
        data: Array2::from_shape_vec((frames, dims), values).expect("length checked"),
        kind,
        fingerprint: fields[3].trim().to_string(),
    })
}

pub fn write_feature_matrix(m: &FeatureMatrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Csv => encode_csv(m).into_bytes(),
        MatrixFormat::Afm1 => encode_afm1(m)?,
    };
    super::write_atomic(path.as_ref(), &bytes)
}

/// Reads either format, detected from the leading bytes.
pub fn read_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&AFM1_MAGIC) {
        decode_afm1(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::MatrixParse(format!("not UTF-8 text: {e}")))?;
        decode_csv(text)
    }
}
