//! The RGRD raster container plus CSV and PGM exports.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field                                       |
//! |-------|---------------------------------------------|
//! | 0..4  | magic `RGRD`                                |
//! | 4..8  | `u32` rows                                  |
//! | 8..12 | `u32` cols                                  |
//! | 12..16| `u32` dtype: 0 = u8 binary, 1 = f32, 2 = f32 planes |
//! | 16..20| `u32` plane count (dtype 2 only)            |
//!
//! followed by the row-major payload. Multi-plane payloads store each
//! `rows × cols` plane contiguously, plane after plane.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PredictionGrid, PresenceGrid};

pub const MAGIC: &[u8; 4] = b"RGRD";

#[derive(Debug, Clone, PartialEq)]
pub enum RasterData {
    Binary(Vec<u8>),
    Float(Vec<f32>),
    Planes { planes: usize, data: Vec<f32> },
}

impl RasterData {
    fn dtype(&self) -> u32 {
        match self {
            RasterData::Binary(_) => 0,
            RasterData::Float(_) => 1,
            RasterData::Planes { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub spec: GridSpec,
    pub data: RasterData,
}

impl Raster {
    /// Reads the payload as a single f32 plane; binary grids are widened.
    pub fn into_f32(self) -> Result<(GridSpec, Vec<f32>)> {
        match self.data {
            RasterData::Float(v) => Ok((self.spec, v)),
            RasterData::Binary(v) => Ok((self.spec, v.into_iter().map(f32::from).collect())),
            RasterData::Planes { planes: 1, data } => Ok((self.spec, data)),
            RasterData::Planes { planes, .. } => {
                Err(Error::Format(format!("expected a single plane, found {planes}")))
            }
        }
    }
}

pub fn write_raster<W: Write>(mut w: W, raster: &Raster) -> Result<()> {
    let expected = match &raster.data {
        RasterData::Planes { planes, .. } => planes * raster.spec.len(),
        _ => raster.spec.len(),
    };
    let len = match &raster.data {
        RasterData::Binary(v) => v.len(),
        RasterData::Float(v) | RasterData::Planes { data: v, .. } => v.len(),
    };
    if len != expected {
        return Err(Error::Input(format!("raster payload has {len} values, expected {expected}")));
    }
    w.write_all(MAGIC)?;
    w.write_all(&(raster.spec.rows() as u32).to_le_bytes())?;
    w.write_all(&(raster.spec.cols() as u32).to_le_bytes())?;
    w.write_all(&raster.data.dtype().to_le_bytes())?;
    match &raster.data {
        RasterData::Binary(v) => w.write_all(v)?,
        RasterData::Float(v) => write_f32s(&mut w, v)?,
        RasterData::Planes { planes, data } => {
            w.write_all(&(*planes as u32).to_le_bytes())?;
            write_f32s(&mut w, data)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_raster<R: Read>(mut r: R) -> Result<Raster> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad raster magic {magic:?}")));
    }
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let spec = GridSpec::from_shape(rows, cols).map_err(|e| Error::Format(e.to_string()))?;
    let dtype = read_u32(&mut r)?;
    let data = match dtype {
        0 => {
            let mut v = vec![0u8; spec.len()];
            r.read_exact(&mut v)?;
            RasterData::Binary(v)
        }
        1 => RasterData::Float(read_f32s(&mut r, spec.len())?),
        2 => {
            let planes = read_u32(&mut r)? as usize;
            RasterData::Planes { planes, data: read_f32s(&mut r, planes * spec.len())? }
        }
        t => return Err(Error::Format(format!("unknown raster dtype tag {t}"))),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after raster payload".into()));
    }
    Ok(Raster { spec, data })
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn save_raster(path: impl AsRef<Path>, raster: &Raster) -> Result<()> {
    write_raster(BufWriter::new(File::create(path)?), raster)
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<Raster> {
    read_raster(BufReader::new(File::open(path)?))
}

pub fn save_presence(path: impl AsRef<Path>, grid: &PresenceGrid) -> Result<()> {
    save_raster(path, &Raster { spec: *grid.spec(), data: RasterData::Binary(grid.values().to_vec()) })
}

pub fn load_presence(path: impl AsRef<Path>) -> Result<PresenceGrid> {
    let raster = load_raster(path)?;
    match raster.data {
        RasterData::Binary(v) => PresenceGrid::new(raster.spec, v),
        _ => Err(Error::Format("presence grids must use the u8 binary dtype".into())),
    }
}

/// Stores predictions as f32, the on-disk precision of every real-valued grid.
pub fn save_prediction(path: impl AsRef<Path>, grid: &PredictionGrid) -> Result<()> {
    let data = grid.values().iter().map(|&v| v as f32).collect();
    save_raster(path, &Raster { spec: *grid.spec(), data: RasterData::Float(data) })
}

pub fn load_prediction(path: impl AsRef<Path>) -> Result<PredictionGrid> {
    let (spec, values) = load_raster(path)?.into_f32()?;
    PredictionGrid::new(spec, values.into_iter().map(f64::from).collect())
}

/// Writes a grid as CSV text, one raster row per line.
pub fn write_grid_csv<W: Write>(mut w: W, spec: &GridSpec, values: &[f64]) -> Result<()> {
    if values.len() != spec.len() {
        return Err(Error::Input("CSV export: value count does not match grid".into()));
    }
    for row in values.chunks(spec.cols()) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an 8-bit binary PGM (`P5`) preview.
///
/// Values are min/max scaled over the finite cells: a cell maps to
/// `round(255 · (v − min) / (max − min))`. Constant grids and non-finite
/// cells render as 0.
pub fn write_pgm<W: Write>(mut w: W, spec: &GridSpec, values: &[f64]) -> Result<()> {
    if values.len() != spec.len() {
        return Err(Error::Input("PGM export: value count does not match grid".into()));
    }
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let pixels: Vec<u8> = values
        .iter()
        .map(|&v| {
            if v.is_finite() && span > 0.0 {
                (255.0 * (v - lo) / span).round() as u8
            } else {
                0
            }
        })
        .collect();
    write!(w, "P5\n{} {}\n255\n", spec.cols(), spec.rows())?;
    w.write_all(&pixels)?;
    w.flush()?;
    Ok(())
}
