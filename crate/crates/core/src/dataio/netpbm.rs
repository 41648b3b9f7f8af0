//! Binary NetPBM (P5/P6) reading and writing.
//!
//! P6 images load as 1×3×H×W tensors scaled to [0,1]; masks are written as
//! P5 with values {0, 255} and binarize at 128 on read. Maxval up to 255 is
//! supported (single-byte samples).

use std::path::Path;

use crate::error::{Error, Result};
use crate::postproc::BinaryMask;
use crate::tensor::Tensor;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Netpbm { offset: self.pos, message: message.into() }
    }

    fn skip_space_and_comments(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => return Ok(()),
                None => return Err(self.err("unexpected end of header")),
            }
        }
    }

    fn ascii_int(&mut self) -> Result<usize> {
        self.skip_space_and_comments()?;
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected an integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("digits are utf8")
            .parse()
            .map_err(|_| self.err("integer out of range"))
    }
}

struct Header {
    color: bool,
    width: usize,
    height: usize,
    maxval: usize,
    payload_at: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 {
        return Err(cur.err("file too short for a NetPBM magic"));
    }
    let color = match &bytes[0..2] {
        b"P5" => false,
        b"P6" => true,
        _ => return Err(cur.err("expected P5 or P6 magic")),
    };
    cur.pos = 2;
    let width = cur.ascii_int()?;
    let height = cur.ascii_int()?;
    let maxval = cur.ascii_int()?;
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(cur.err(format!("unsupported maxval {maxval} (1..=255)")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected single whitespace before payload")),
    }
    Ok(Header { color, width, height, maxval, payload_at: cur.pos })
}

fn payload<'a>(bytes: &'a [u8], h: &Header) -> Result<&'a [u8]> {
    let channels = if h.color { 3 } else { 1 };
    let need = h.width * h.height * channels;
    let have = bytes.len() - h.payload_at;
    if have < need {
        return Err(Error::Netpbm {
            offset: bytes.len(),
            message: format!("payload truncated: need {need} bytes, have {have}"),
        });
    }
    Ok(&bytes[h.payload_at..h.payload_at + need])
}

/// Reads a P6 color image into a 1×3×H×W tensor scaled by 1/maxval.
pub fn read_image(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path)?;
    let header = parse_header(&bytes)?;
    if !header.color {
        return Err(Error::Netpbm { offset: 0, message: "expected a P6 color image".into() });
    }
    let raw = payload(&bytes, &header)?;
    let (w, h) = (header.width, header.height);
    let scale = 1.0 / header.maxval as f32;
    let mut data = vec![0.0f32; 3 * h * w];
    for p in 0..h * w {
        for c in 0..3 {
            data[c * h * w + p] = raw[p * 3 + c] as f32 * scale;
        }
    }
    Tensor::new(vec![1, 3, h, w], data)
}

/// Reads a P5 grayscale mask, binarizing at sample ≥ 128 (after no scaling;
/// the threshold applies to the raw byte against maxval-scaled 0.5).
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let bytes = std::fs::read(path)?;
    let header = parse_header(&bytes)?;
    if header.color {
        return Err(Error::Netpbm { offset: 0, message: "expected a P5 grayscale mask".into() });
    }
    let raw = payload(&bytes, &header)?;
    // ≥ 128 on the 255 scale; for other maxvals, ≥ half of maxval rounded up.
    let cut = (header.maxval + 1) / 2;
    let data = raw.iter().map(|&b| u8::from(b as usize >= cut.max(1))).collect();
    BinaryMask::new(header.height, header.width, data)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes a mask as binary P5 with values {0, 255}, atomically.
pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let (h, w) = mask.dims();
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(mask.data().iter().map(|&v| if v == 1 { 255u8 } else { 0 }));
    atomic_write(path, &bytes)
}

/// Writes a 1×3×H×W tensor with values in [0,1] as P6, atomically.
pub fn write_image(path: &Path, image: &Tensor) -> Result<()> {
    let (n, c, h, w) = image.dims4()?;
    if n != 1 || c != 3 {
        return Err(Error::shape(format!("P6 writer expects 1×3×H×W, got {:?}", image.shape())));
    }
    let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
    let d = image.data();
    for p in 0..h * w {
        for ci in 0..3 {
            let v = (d[ci * h * w + p].clamp(0.0, 1.0) * 255.0).round() as u8;
            bytes.push(v);
        }
    }
    atomic_write(path, &bytes)
}
