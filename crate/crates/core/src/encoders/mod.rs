//! Fixed per-cell location features.
//!
//! * [`sincos_features`]: `[sin πλ', cos πλ', sin πφ', cos πφ']` with
//!   `λ' = lon/180`, `φ' = lat/90`.
//! * [`sph_harm_features`]: the real orthonormal spherical-harmonic basis up
//!   to a maximum degree, evaluated at cell centres.
//! * [`load_env`]: environmental covariate rasters, resampled and standardised.

mod env;
mod harmonics;
mod legendre;

pub use env::{load_env, load_env_manifest, EnvManifest, EnvStack};
pub use harmonics::{sh_index, sph_harm_features, sph_harm_row};
pub use legendre::{legendre, legendre_table};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::raster_io::{Raster, RasterData};

/// An `L × dim` feature matrix, one row per cell in row-major cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationFeatures {
    spec: GridSpec,
    dim: usize,
    data: Vec<f64>,
}

impl LocationFeatures {
    pub fn new(spec: GridSpec, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != spec.len() * dim {
            return Err(Error::Input(format!(
                "feature matrix has {} values, expected {} x {dim}",
                data.len(),
                spec.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("location features must be finite".into()));
        }
        Ok(Self { spec, dim, data })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, cell: usize) -> &[f64] {
        &self.data[cell * self.dim..(cell + 1) * self.dim]
    }

    /// Column-wise concatenation `[self | other]`.
    pub fn concat(&self, other: &LocationFeatures) -> Result<LocationFeatures> {
        self.spec.check_same(&other.spec, "feature concat")?;
        let dim = self.dim + other.dim;
        let mut data = Vec::with_capacity(self.spec.len() * dim);
        for i in 0..self.spec.len() {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(LocationFeatures { spec: self.spec, dim, data })
    }

    /// Multi-plane RGRD export: one f32 plane per feature.
    pub fn to_raster(&self) -> Raster {
        let n = self.spec.len();
        let mut data = vec![0f32; n * self.dim];
        for (cell, row) in self.data.chunks(self.dim.max(1)).enumerate().take(n) {
            for (k, &v) in row.iter().enumerate() {
                data[k * n + cell] = v as f32;
            }
        }
        Raster { spec: self.spec, data: RasterData::Planes { planes: self.dim, data } }
    }

    pub fn from_raster(raster: &Raster) -> Result<Self> {
        let n = raster.spec.len();
        let (planes, values): (usize, &[f32]) = match &raster.data {
            RasterData::Planes { planes, data } => (*planes, data),
            RasterData::Float(v) => (1, v),
            RasterData::Binary(_) => return Err(Error::Format("features need an f32 raster".into())),
        };
        let mut data = vec![0.0; n * planes];
        for k in 0..planes {
            for cell in 0..n {
                data[cell * planes + k] = f64::from(values[k * n + cell]);
            }
        }
        Self::new(raster.spec, planes, data)
    }
}

/// Sin-cos encoding of each cell centre, `dim = 4`.
pub fn sincos_features(spec: &GridSpec) -> LocationFeatures {
    let mut data = Vec::with_capacity(spec.len() * 4);
    for r in 0..spec.rows() {
        for c in 0..spec.cols() {
            let (lat, lon) = spec.cell_center(r, c);
            let (sl, cl) = (PI * lon / 180.0).sin_cos();
            let (sp, cp) = (PI * lat / 90.0).sin_cos();
            data.extend_from_slice(&[sl, cl, sp, cp]);
        }
    }
    LocationFeatures { spec: *spec, dim: 4, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn sincos_reference_points() {
        // 2 x 4 grid: centres at lat ±45, lon -135, -45, 45, 135.
        let spec = GridSpec::from_shape(2, 4).unwrap();
        let row = sincos_features(&spec).row(spec.index(0, 2)).to_vec();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in row.iter().zip([s, s, 1.0, 0.0]) {
            assert!((got - want).abs() < 1e-15, "{row:?}");
        }

        // A 3 x 3 grid puts a centre exactly at (0, 0); a 3 x 4 one at lon 90 would not,
        // so use 3 x 2 for (0, 90): centres at lon -90 and 90.
        let spec = GridSpec::from_shape(3, 3).unwrap();
        let f = sincos_features(&spec);
        let row = f.row(spec.index(1, 1));
        assert!(row[0].abs() < 1e-15 && (row[1] - 1.0).abs() < 1e-15 && row[2].abs() < 1e-15 && (row[3] - 1.0).abs() < 1e-15);
        let spec = GridSpec::from_shape(3, 2).unwrap();
        let f = sincos_features(&spec);
        let row = f.row(spec.index(1, 1));
        assert!((row[0] - 1.0).abs() < 1e-15 && row[1].abs() < 1e-15 && row[2].abs() < 1e-15 && (row[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sincos_range() {
        let f = sincos_features(&make_grid(1.0).unwrap());
        assert_eq!(f.dim(), 4);
        assert!(f.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn plane_round_trip() {
        let spec = GridSpec::from_shape(2, 3).unwrap();
        let f = LocationFeatures::new(spec, 2, (0..12).map(|i| i as f64 * 0.5).collect()).unwrap();
        let raster = f.to_raster();
        assert_eq!(LocationFeatures::from_raster(&raster).unwrap(), f);
        let both = f.concat(&sincos_features(&spec)).unwrap();
        assert_eq!(both.dim(), 6);
        assert_eq!(&both.row(4)[..2], f.row(4));
    }
}
