//! Binary greyscale PGM (P5, maxval 255) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Grid;

/// Rounds a `[0, 1]` intensity to the nearest representable 8-bit level.
pub fn quantize(v: f64) -> f64 {
    to_byte(v) as f64 / 255.0
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes the trailing `[H, W]` plane of a single-channel grid.
pub fn encode(image: &Grid) -> Result<Vec<u8>> {
    let r = image.rank();
    if r < 2 || image.shape()[..r - 2].iter().product::<usize>() != 1 {
        return Err(Error::Size(format!(
            "PGM needs a single plane, got {:?}",
            image.shape()
        )));
    }
    let (h, w) = (image.shape()[r - 2], image.shape()[r - 1]);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.values().iter().map(|&v| to_byte(v)));
    Ok(out)
}

/// Decodes to a `[1, H, W]` grid with values `k / 255`.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<Grid> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(origin, pos, "truncated PGM header"));
        }
        fields.push((start, &bytes[start..pos]));
    }
    if fields[0].1 != b"P5" {
        return Err(Error::parse(origin, 0, "not a binary PGM (expected P5)"));
    }
    let num = |(off, f): (usize, &[u8])| -> Result<usize> {
        std::str::from_utf8(f)
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&v: &usize| v > 0)
            .ok_or_else(|| Error::parse(origin, off, "invalid header number"))
    };
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(Error::parse(origin, fields[3].0, format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = w * h;
    if bytes.len() < pos + need {
        return Err(Error::parse(
            origin,
            bytes.len(),
            format!("raster truncated: need {need} bytes after offset {pos}"),
        ));
    }
    let values = bytes[pos..pos + need].iter().map(|&b| b as f64 / 255.0).collect();
    Grid::new(&[1, h, w], values)
}

pub fn write(path: &Path, image: &Grid) -> Result<()> {
    fs::write(path, encode(image)?).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Grid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
