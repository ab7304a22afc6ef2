//! File formats: binary and CSV matrix containers, imaging CSV and heatmaps.

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::music::ImagingResult;
use crate::scene::Grid;
use std::fmt::Write as _;
use std::path::Path;

/// Leading bytes of the binary matrix container.
pub const MATRIX_MAGIC: &[u8; 8] = b"CMATRIX1";

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Serializes `m` as magic, rows, cols (u64 LE) and row-major `(re, im)` f64 LE pairs.
pub fn encode_matrix(m: &CMat) -> Vec<u8> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(24 + 16 * r * c);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(r as u64).to_le_bytes());
    out.extend_from_slice(&(c as u64).to_le_bytes());
    for i in 0..r {
        for j in 0..c {
            out.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            out.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<CMat> {
    if bytes.len() < 24 || &bytes[..8] != MATRIX_MAGIC {
        return Err(Error::Format("not a matrix container (bad magic)".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    let (r, c) = (word(8) as usize, word(16) as usize);
    let expected = r.checked_mul(c).and_then(|v| v.checked_mul(16)).and_then(|v| v.checked_add(24));
    if expected != Some(bytes.len()) {
        return Err(Error::Format(format!("container declares {r}x{c} but holds {} bytes", bytes.len())));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    Ok(CMat::from_fn(r, c, |i, j| {
        let k = 24 + 16 * (i * c + j);
        C64::new(f(k), f(k + 8))
    }))
}

pub fn write_matrix(path: &Path, m: &CMat) -> Result<()> {
    std::fs::write(path, encode_matrix(m)).map_err(|e| io_err(path, e))
}

pub fn read_matrix(path: &Path) -> Result<CMat> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    decode_matrix(&bytes)
}

/// CSV with one `row,col,re,im` line per entry.
pub fn matrix_csv(m: &CMat) -> String {
    let mut s = String::from("row,col,re,im\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let _ = writeln!(s, "{i},{j},{:e},{:e}", m[(i, j)].re, m[(i, j)].im);
        }
    }
    s
}

pub fn write_matrix_csv(path: &Path, m: &CMat) -> Result<()> {
    std::fs::write(path, matrix_csv(m)).map_err(|e| io_err(path, e))
}

/// Imaging values as CSV with columns `x,y,z,J,in_support`.
pub fn imaging_csv(grid: &Grid, img: &ImagingResult) -> Result<String> {
    if grid.len() != img.values.len() {
        return Err(Error::DimensionMismatch("grid and imaging result differ in size".into()));
    }
    let mut s = String::from("x,y,z,J,in_support\n");
    for (j, p) in grid.points.iter().enumerate() {
        let inside = img.recovered_support.binary_search(&j).is_ok();
        let _ = writeln!(s, "{},{},{},{:e},{}", p[0], p[1], p[2], img.values[j], inside as u8);
    }
    Ok(s)
}

/// Binary greyscale PGM of `log₁₀ J` over a planar lattice (row `p₁`, column `p₂`).
pub fn imaging_heatmap(grid: &Grid, img: &ImagingResult) -> Result<Vec<u8>> {
    let side = grid.side.ok_or_else(|| Error::Format("heatmaps need a planar lattice".into()))?;
    if grid.len() != img.values.len() {
        return Err(Error::DimensionMismatch("grid and imaging result differ in size".into()));
    }
    let logs: Vec<f64> = img.values.iter().map(|v| v.max(1e-300).log10()).collect();
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(logs.iter().map(|v| (255.0 * (v - lo) / span).round() as u8));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_round_trip_and_layout() {
        let m = CMat::from_fn(2, 3, |i, j| C64::new(i as f64 + 0.5, -(j as f64)));
        let bytes = encode_matrix(&m);
        assert_eq!(&bytes[..8], MATRIX_MAGIC);
        assert_eq!(bytes.len(), 24 + 16 * 6);
        // Row-major: the second stored entry is (0, 1).
        assert_eq!(f64::from_le_bytes(bytes[40..48].try_into().unwrap()), 0.5);
        assert_eq!(f64::from_le_bytes(bytes[48..56].try_into().unwrap()), -1.0);
        assert_eq!(decode_matrix(&bytes).unwrap(), m);
        assert!(decode_matrix(&bytes[..30]).is_err());
        assert!(decode_matrix(b"XXXXXXXXaaaaaaaabbbbbbbb").is_err());
    }

    #[test]
    fn csv_lists_every_entry() {
        let m = CMat::from_fn(2, 2, |i, j| C64::new(i as f64, j as f64));
        let csv = matrix_csv(&m);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("1,1,1e0,1e0"));
    }
}
