//! Binary tensor container.
//!
//! Layout, all multi-byte fields little-endian:
//!
//! ```text
//! magic   "CSCF"            4 bytes
//! version u16 = 1
//! tag     u8                1=Image 2=CoeffMap 3=Dictionary 4=TransferOp
//! rank    u8
//! dims    u32 x rank
//! payload f32 x prod(dims)  (+1 trailing value for TransferOp)
//! crc32   u32               over header and payload
//! ```
//!
//! Tag 1 doubles as the generic two-dimensional real grid; FiLM parameters
//! and semantic-provider payloads are stored as tag-1 records.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::types::{CoeffMap, Dictionary, Image};

pub const MAGIC: [u8; 4] = *b"CSCF";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum TensorKind {
    Image = 1,
    CoeffMap = 2,
    Dictionary = 3,
    TransferOp = 4,
}

impl TensorKind {
    fn from_tag(tag: u8, offset: usize) -> Result<Self> {
        match tag {
            1 => Ok(TensorKind::Image),
            2 => Ok(TensorKind::CoeffMap),
            3 => Ok(TensorKind::Dictionary),
            4 => Ok(TensorKind::TransferOp),
            other => Err(Error::MalformedHeader {
                offset,
                reason: format!("unknown type tag {other}"),
            }),
        }
    }

    /// Values stored beyond the product of the dims.
    fn trailing_values(self) -> usize {
        match self {
            TensorKind::TransferOp => 1,
            _ => 0,
        }
    }
}

/// One decoded record, values kept in their on-disk precision.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor {
    pub kind: TensorKind,
    pub dims: Vec<u32>,
    pub values: Vec<f32>,
}

impl RawTensor {
    pub fn new(kind: TensorKind, dims: Vec<u32>, values: &[f64]) -> Result<Self> {
        if dims.is_empty() || dims.len() > u8::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "tensor rank {} out of range",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "tensor dims must be positive, got {dims:?}"
            )));
        }
        let expected = element_count(&dims, 0)? + kind.trailing_values();
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "tensor dims {dims:?} need {expected} values, got {}",
                values.len()
            )));
        }
        let values: Vec<f32> = values.iter().map(|&v| v as f32).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor payload"));
        }
        Ok(RawTensor { kind, dims, values })
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn dim(&self, i: usize) -> usize {
        self.dims[i] as usize
    }

    pub fn expect(&self, kind: TensorKind, rank: usize) -> Result<()> {
        if self.kind != kind {
            return Err(Error::TypeMismatch {
                found: self.kind as u8,
                expected: kind as u8,
            });
        }
        if self.dims.len() != rank {
            return Err(Error::DimensionMismatch(format!(
                "expected rank {rank}, found {}",
                self.dims.len()
            )));
        }
        Ok(())
    }

    pub fn encode(&self, out: &mut Vec<u8>) {
        let start = out.len();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind as u8);
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode(&mut out);
        out
    }

    /// Decodes one record starting at `base` and returns it with the number
    /// of bytes consumed. Offsets in errors are absolute within `bytes`.
    pub fn decode(bytes: &[u8], base: usize) -> Result<(Self, usize)> {
        let buf = &bytes[base..];
        let need = |at: usize, len: usize| -> Result<()> {
            if buf.len() < at + len {
                Err(Error::Truncated {
                    offset: base + at,
                    expected: len,
                    found: buf.len().saturating_sub(at),
                })
            } else {
                Ok(())
            }
        };

        need(0, 8)?;
        let magic: [u8; 4] = buf[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::MagicMismatch { found: magic });
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let kind = TensorKind::from_tag(buf[6], base + 6)?;
        let rank = buf[7] as usize;
        if rank == 0 {
            return Err(Error::MalformedHeader {
                offset: base + 7,
                reason: "rank must be positive".into(),
            });
        }
        need(8, 4 * rank)?;
        let dims: Vec<u32> = buf[8..8 + 4 * rank]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::MalformedHeader {
                offset: base + 8 + 4 * i,
                reason: "zero dimension".into(),
            });
        }
        let header_len = 8 + 4 * rank;
        let count = element_count(&dims, base + 8)?
            .checked_add(kind.trailing_values())
            .ok_or_else(|| overflow(base + 8))?;
        let payload_len = count.checked_mul(4).ok_or_else(|| overflow(base + 8))?;
        need(header_len, payload_len)?;
        need(header_len + payload_len, 4)?;
        let body_end = header_len + payload_len;
        let stored = u32::from_le_bytes(buf[body_end..body_end + 4].try_into().unwrap());
        let computed = crc32fast::hash(&buf[..body_end]);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }
        let values = buf[header_len..body_end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((RawTensor { kind, dims, values }, body_end + 4))
    }
}

fn overflow(offset: usize) -> Error {
    Error::DimensionOverflow {
        offset,
        reason: "element count overflows".into(),
    }
}

fn element_count(dims: &[u32], offset: usize) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, &d| {
        acc.checked_mul(d as usize).ok_or_else(|| overflow(offset))
    })
}

/// Conversion between a domain type and its on-disk record.
pub trait TensorRecord: Sized {
    fn to_raw(&self) -> Result<RawTensor>;
    fn from_raw(raw: &RawTensor) -> Result<Self>;
}

impl TensorRecord for Image {
    fn to_raw(&self) -> Result<RawTensor> {
        RawTensor::new(
            TensorKind::Image,
            vec![dim_u32(self.height())?, dim_u32(self.width())?],
            self.data(),
        )
    }

    fn from_raw(raw: &RawTensor) -> Result<Self> {
        raw.expect(TensorKind::Image, 2)?;
        Image::new(raw.dim(0), raw.dim(1), raw.values_f64())
    }
}

impl TensorRecord for CoeffMap {
    fn to_raw(&self) -> Result<RawTensor> {
        RawTensor::new(
            TensorKind::CoeffMap,
            vec![
                dim_u32(self.atoms())?,
                dim_u32(self.height())?,
                dim_u32(self.width())?,
            ],
            self.data(),
        )
    }

    fn from_raw(raw: &RawTensor) -> Result<Self> {
        raw.expect(TensorKind::CoeffMap, 3)?;
        CoeffMap::new(raw.dim(0), raw.dim(1), raw.dim(2), raw.values_f64())
    }
}

impl TensorRecord for Dictionary {
    fn to_raw(&self) -> Result<RawTensor> {
        let k = dim_u32(self.kernel())?;
        RawTensor::new(
            TensorKind::Dictionary,
            vec![dim_u32(self.atoms())?, k, k],
            self.data(),
        )
    }

    fn from_raw(raw: &RawTensor) -> Result<Self> {
        raw.expect(TensorKind::Dictionary, 3)?;
        if raw.dims[1] != raw.dims[2] {
            return Err(Error::DimensionMismatch(format!(
                "dictionary atoms must be square, got {}x{}",
                raw.dims[1], raw.dims[2]
            )));
        }
        Dictionary::new(raw.dim(0), raw.dim(1), raw.values_f64())
    }
}

pub(crate) fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| {
        Error::InvalidParameter(format!("dimension {d} does not fit the u32 header field"))
    })
}

pub fn serialize_tensor<T: TensorRecord>(obj: &T, path: impl AsRef<Path>) -> Result<()> {
    write_records(path, &[obj.to_raw()?])
}

pub fn deserialize_tensor<T: TensorRecord>(path: impl AsRef<Path>) -> Result<T> {
    let records = read_records(path)?;
    match records.as_slice() {
        [one] => T::from_raw(one),
        _ => Err(Error::MalformedHeader {
            offset: 0,
            reason: format!("expected one record, found {}", records.len()),
        }),
    }
}

pub fn write_records(path: impl AsRef<Path>, records: &[RawTensor]) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    for r in records {
        r.encode(&mut bytes);
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RawTensor>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_records(&bytes)
}

pub fn decode_records(bytes: &[u8]) -> Result<Vec<RawTensor>> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let (rec, used) = RawTensor::decode(bytes, at)?;
        out.push(rec);
        at += used;
    }
    if out.is_empty() {
        return Err(Error::Truncated {
            offset: 0,
            expected: 8,
            found: 0,
        });
    }
    Ok(out)
}
