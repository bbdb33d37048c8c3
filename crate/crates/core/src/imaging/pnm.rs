//! Binary PGM (P5) and PPM (P6) codec, maxval 255 only.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{GrayImage, RgbImage};
use crate::error::{Error, Result};

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let (w, h, body) = parse_header(bytes, b"P5")?;
    if body.len() < w * h {
        return Err(Error::Format(format!(
            "PGM body has {} bytes, expected {}",
            body.len(),
            w * h
        )));
    }
    GrayImage::from_raw(w, h, body[..w * h].to_vec())
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let (w, h, body) = parse_header(bytes, b"P6")?;
    if body.len() < 3 * w * h {
        return Err(Error::Format(format!(
            "PPM body has {} bytes, expected {}",
            body.len(),
            3 * w * h
        )));
    }
    RgbImage::from_raw(w, h, body[..3 * w * h].to_vec())
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pgm(img))?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    fs::write(path, encode_ppm(img))?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    decode_ppm(&fs::read(path)?)
}

/// Parses magic, width, height and maxval; returns the remaining body.
fn parse_header<'a>(bytes: &'a [u8], magic: &[u8]) -> Result<(usize, usize, &'a [u8])> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::Format(format!(
            "expected {} magic",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and '#' comments between tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while !matches!(bytes.get(pos), None | Some(b'\n')) {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PNM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad PNM header number".into()))?;
    }
    if fields[2] != 255 {
        return Err(Error::Format(format!(
            "only maxval 255 is supported, got {}",
            fields[2]
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::Format("missing whitespace after PNM header".into()));
    }
    Ok((fields[0], fields[1], &bytes[pos + 1..]))
}
