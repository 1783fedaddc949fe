//! `GFT1` binary tensor files: magic `GFT1`, `u32` rank, `u32` dims, then
//! `f32` values, all little-endian, row-major.

use std::fs;
use std::path::Path;

use super::Grid;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GFT1";

pub fn encode(grid: &Grid) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * grid.rank() + 4 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.rank() as u32).to_le_bytes());
    for &d in grid.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in grid.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<Grid> {
    let mut pos = 0usize;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        let end = pos + n;
        if end > bytes.len() {
            return Err(Error::parse(origin, pos, format!("truncated while reading {what}")));
        }
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    if take(4, "magic")? != MAGIC {
        return Err(Error::parse(origin, 0, "bad magic, expected GFT1"));
    }
    let word = |b: &[u8]| u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
    let rank = word(take(4, "rank")?) as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::parse(origin, 4, format!("unsupported rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(word(take(4, "dimension")?) as usize);
    }
    let n: usize = shape.iter().product();
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let b = take(4, "values")?;
        values.push(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64);
    }
    if pos != bytes.len() {
        return Err(Error::parse(origin, pos, "trailing bytes after values"));
    }
    Grid::new(&shape, values).map_err(|e| Error::parse(origin, 8, e.to_string()))
}

pub fn write(path: &Path, grid: &Grid) -> Result<()> {
    fs::write(path, encode(grid)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Grid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let g = Grid::new(&[2, 1], vec![1.0, -0.5]).unwrap();
        let bytes = encode(&g);
        let expected: Vec<u8> = [
            b"GFT1".to_vec(),
            2u32.to_le_bytes().to_vec(),
            2u32.to_le_bytes().to_vec(),
            1u32.to_le_bytes().to_vec(),
            1.0f32.to_le_bytes().to_vec(),
            (-0.5f32).to_le_bytes().to_vec(),
        ]
        .concat();
        assert_eq!(bytes, expected);
        assert_eq!(decode(&bytes, Path::new("mem")).unwrap(), g);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode(&Grid::ones(&[3, 3]));
        let err = decode(&bytes[..bytes.len() - 2], Path::new("t.gft")).unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert_eq!(offset, 8 + 8 + 4 * 8),
            other => panic!("unexpected {other}"),
        }
        assert!(decode(b"XXXX", Path::new("m")).is_err());
    }
}
