//! `RGRD` single-band raster files.
//!
//! Layout: the 4 magic bytes `RGRD`, little-endian `u32` width and height,
//! then `width * height` little-endian `f32` values in row-major order.
//! NaN encodes nodata.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use super::RasterGrid;
use crate::error::{Error, Result};

pub const RGRID_MAGIC: &[u8; 4] = b"RGRD";

const HEADER_LEN: usize = 12;

pub fn read_rgrid_bytes(bytes: &[u8], timestamp: NaiveDate) -> std::result::Result<RasterGrid, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes is shorter than the header", bytes.len()));
    }
    if &bytes[..4] != RGRID_MAGIC {
        return Err(format!("bad magic {:?}", &bytes[..4]));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or("extent overflows")?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(format!(
            "{width}x{height} needs {expected} payload bytes, found {}",
            body.len()
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    RasterGrid::new(width, height, values, timestamp).map_err(|e| e.to_string())
}

pub fn write_rgrid_bytes(grid: &RasterGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + grid.len() * 4);
    out.extend_from_slice(RGRID_MAGIC);
    out.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    for v in grid.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn read_rgrid(path: &Path, timestamp: NaiveDate) -> Result<RasterGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_rgrid_bytes(&bytes, timestamp).map_err(|reason| Error::MalformedRaster {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn write_rgrid(path: &Path, grid: &RasterGrid) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, write_rgrid_bytes(grid)).map_err(|e| Error::io(path, e))
}
