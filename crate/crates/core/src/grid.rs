//! The global latitude/longitude raster and the two grids defined on it.
//!
//! Row 0 is the northernmost band and column 0 starts at longitude −180.
//! Cell edges sit at multiples of the cell size, so cell `(r, c)` covers
//! latitudes `(90 − (r+1)·Δlat, 90 − r·Δlat]` and longitudes
//! `[−180 + c·Δlon, −180 + (c+1)·Δlon)`.

use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::occurrence::OccurrenceRecord;

const DIVISIBILITY_TOL: f64 = 1e-9;

/// Shape of a global raster.
///
/// Geographic grids built with [`make_grid`] have `cols = 2 · rows`. Grids
/// built with [`GridSpec::from_shape`] may have any aspect ratio; latitude and
/// longitude are then split independently into `rows` and `cols` bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    rows: usize,
    cols: usize,
}

impl GridSpec {
    pub fn from_shape(rows: usize, cols: usize) -> Result<Self> {
        ensure!(rows > 0 && cols > 0, Config, "grid shape {rows}x{cols} has an empty axis");
        ensure!(
            rows <= u32::MAX as usize && cols <= u32::MAX as usize,
            Config,
            "grid shape {rows}x{cols} exceeds u32 dimensions"
        );
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of cells, `L`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell height in degrees of latitude.
    pub fn resolution_deg(&self) -> f64 {
        180.0 / self.rows as f64
    }

    /// Cell width in degrees of longitude.
    pub fn lon_step_deg(&self) -> f64 {
        360.0 / self.cols as f64
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Cell containing `(latitude, longitude)`.
    ///
    /// Latitude −90 clamps into the last row and longitude 180 wraps to
    /// column 0, so every legal coordinate has exactly one cell.
    pub fn cell_of(&self, latitude: f64, longitude: f64) -> Result<(usize, usize)> {
        ensure!(
            latitude.is_finite() && (-90.0..=90.0).contains(&latitude),
            Input,
            "latitude {latitude} outside [-90, 90]"
        );
        ensure!(
            longitude.is_finite() && (-180.0..=180.0).contains(&longitude),
            Input,
            "longitude {longitude} outside [-180, 180]"
        );
        let row = ((90.0 - latitude) * self.rows as f64 / 180.0).floor() as usize;
        let col = ((longitude + 180.0) * self.cols as f64 / 360.0).floor() as usize;
        Ok((row.min(self.rows - 1), col % self.cols))
    }

    /// Latitude and longitude of the centre of cell `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let lat = 90.0 - (row as f64 + 0.5) * self.resolution_deg();
        let lon = -180.0 + (col as f64 + 0.5) * self.lon_step_deg();
        (lat, lon)
    }

    pub(crate) fn check_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        ensure!(
            self == other,
            Input,
            "{what}: grid {}x{} does not match {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
        Ok(())
    }
}

/// Builds the global grid with square cells of `resolution_deg` degrees.
///
/// ```
/// let grid = rangekit::grid::make_grid(0.2).unwrap();
/// assert_eq!((grid.rows(), grid.cols(), grid.len()), (900, 1800, 1_620_000));
/// ```
pub fn make_grid(resolution_deg: f64) -> Result<GridSpec> {
    if !(resolution_deg.is_finite() && resolution_deg > 0.0 && resolution_deg <= 90.0) {
        return Err(Error::Config(format!(
            "resolution {resolution_deg} must lie in (0, 90] degrees"
        )));
    }
    let bands = 180.0 / resolution_deg;
    let rows = bands.round();
    if (bands - rows).abs() > DIVISIBILITY_TOL * rows.max(1.0) {
        return Err(Error::Config(format!(
            "resolution {resolution_deg} does not divide 180 degrees evenly"
        )));
    }
    let rows = rows as usize;
    GridSpec::from_shape(rows, 2 * rows)
}

/// Binary ground-truth range map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresenceGrid {
    spec: GridSpec,
    values: Vec<u8>,
}

impl PresenceGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: vec![0; spec.len()] }
    }

    pub fn new(spec: GridSpec, values: Vec<u8>) -> Result<Self> {
        ensure!(
            values.len() == spec.len(),
            Input,
            "presence grid has {} values, expected {}",
            values.len(),
            spec.len()
        );
        if let Some(i) = values.iter().position(|&v| v > 1) {
            return Err(Error::Input(format!("presence value {} at cell {i} is not 0 or 1", values[i])));
        }
        Ok(Self { spec, values })
    }

    /// Builds a grid from a row-major boolean mask.
    pub fn from_mask(spec: GridSpec, mask: &[bool]) -> Result<Self> {
        Self::new(spec, mask.iter().map(|&b| u8::from(b)).collect())
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn is_present(&self, index: usize) -> bool {
        self.values[index] == 1
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.is_present(self.spec.index(row, col))
    }

    pub fn set(&mut self, row: usize, col: usize, present: bool) {
        let i = self.spec.index(row, col);
        self.values[i] = u8::from(present);
    }

    pub fn n_positive(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn n_negative(&self) -> usize {
        self.values.len() - self.n_positive()
    }

    /// Cellwise OR with another grid on the same spec.
    pub fn union(&self, other: &PresenceGrid) -> Result<PresenceGrid> {
        self.spec.check_same(&other.spec, "union")?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a | b).collect();
        Ok(PresenceGrid { spec: self.spec, values })
    }

    pub fn transpose(&self) -> PresenceGrid {
        let (rows, cols) = (self.spec.rows, self.spec.cols);
        let spec = GridSpec { rows: cols, cols: rows };
        let mut values = vec![0; self.values.len()];
        for r in 0..rows {
            for c in 0..cols {
                values[c * rows + r] = self.values[r * cols + c];
            }
        }
        PresenceGrid { spec, values }
    }
}

/// Predicted per-cell presence probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl PredictionGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        ensure!(
            values.len() == spec.len(),
            Input,
            "prediction grid has {} values, expected {}",
            values.len(),
            spec.len()
        );
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Input(format!(
                "prediction {} at cell {i} is not a probability",
                values[i]
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn constant(spec: GridSpec, p: f64) -> Result<Self> {
        Self::new(spec, vec![p; spec.len()])
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.spec.index(row, col)]
    }
}

/// Result of [`rasterize`]: the grid plus how many records fed it.
#[derive(Debug, Clone)]
pub struct Rasterized {
    pub grid: PresenceGrid,
    pub n_records: usize,
}

impl Rasterized {
    /// True when no record passed the filter. The grid is then all zeros.
    pub fn is_empty(&self) -> bool {
        self.n_records == 0
    }
}

/// Record count above which [`rasterize`] splits the work across threads.
pub const PARALLEL_RASTERIZE_THRESHOLD: usize = 1 << 18;

/// Histogram-bins the records accepted by `filter` and clips counts at one.
pub fn rasterize<F>(spec: GridSpec, records: &[OccurrenceRecord], filter: F) -> Rasterized
where
    F: Fn(&OccurrenceRecord) -> bool + Sync,
{
    rasterize_with_threshold(spec, records, filter, PARALLEL_RASTERIZE_THRESHOLD)
}

pub fn rasterize_with_threshold<F>(
    spec: GridSpec,
    records: &[OccurrenceRecord],
    filter: F,
    parallel_threshold: usize,
) -> Rasterized
where
    F: Fn(&OccurrenceRecord) -> bool + Sync,
{
    let bin = |chunk: &[OccurrenceRecord]| {
        let mut grid = PresenceGrid::zeros(spec);
        let mut n = 0;
        for rec in chunk.iter().filter(|r| filter(r)) {
            // Records are validated on construction, so cell_of cannot fail.
            let (r, c) = spec
                .cell_of(rec.latitude(), rec.longitude())
                .expect("validated record");
            grid.values[spec.index(r, c)] = 1;
            n += 1;
        }
        (grid, n)
    };

    let (grid, n_records) = if records.len() > parallel_threshold {
        let chunk = records.len().div_ceil(rayon::current_num_threads()).max(1);
        records
            .par_chunks(chunk)
            .map(bin)
            .reduce(
                || (PresenceGrid::zeros(spec), 0),
                |(mut a, na), (b, nb)| {
                    a.values.iter_mut().zip(&b.values).for_each(|(x, y)| *x |= y);
                    (a, na + nb)
                },
            )
    } else {
        bin(records)
    };
    if n_records == 0 {
        log::warn!("rasterize: no records passed the filter, returning an empty grid");
    }
    Rasterized { grid, n_records }
}
