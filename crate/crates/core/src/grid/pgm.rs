//! Binary PGM (P5, maxval 255) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::format::{decode_records, TensorRecord, MAGIC};
use crate::grid::types::Image;

/// Largest accepted pixel count; guards against absurd headers.
const MAX_PIXELS: usize = 1 << 28;

/// Reads a P5 PGM or a single-record tensor file holding an image.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&MAGIC) {
        let records = decode_records(&bytes)?;
        return Image::from_raw(&records[0]);
    }
    decode_pgm(&bytes)
}

/// Clamps to [0,1], quantizes round-half-up to 8 bits, writes P5.
pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)?).map_err(|e| Error::io(path, e))
}

/// Round-half-up quantization of a [0,1] intensity to 8 bits.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn encode_pgm(img: &Image) -> Result<Vec<u8>> {
    if img.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("image"));
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader {
                offset: start,
                reason: format!("expected {what}"),
            });
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse().map_err(|_| Error::DimensionOverflow {
            offset: start,
            reason: format!("{what} {text} does not fit"),
        })
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::MalformedHeader {
            offset: 0,
            reason: "expected P5 magic".into(),
        });
    }
    let mut cur = Cursor { bytes, pos: 2 };
    cur.skip_space_and_comments();
    let width_at = cur.pos;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader {
            offset: width_at,
            reason: format!("zero dimension {width}x{height}"),
        });
    }
    if maxval != 255 {
        return Err(Error::MalformedHeader {
            offset: maxval_at,
            reason: format!("maxval {maxval} unsupported (only 255)"),
        });
    }
    let pixels = width
        .checked_mul(height)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| Error::DimensionOverflow {
            offset: width_at,
            reason: format!("{width}x{height} exceeds the pixel limit"),
        })?;
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(Error::MalformedHeader {
                offset: cur.pos,
                reason: "missing whitespace after maxval".into(),
            })
        }
    }
    let payload = &bytes[cur.pos..];
    if payload.len() < pixels {
        return Err(Error::Truncated {
            offset: cur.pos,
            expected: pixels,
            found: payload.len(),
        });
    }
    let data = payload[..pixels]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    Image::new(height, width, data)
}
