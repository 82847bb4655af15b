//! Species range mapping toolkit.
//!
//! `rangekit` turns presence-only occurrence records into binary range maps,
//! scores predicted range maps with proximity-aware metrics, and trains a
//! species-query range model over fixed location features.
//!
//! | module | contents |
//! |--------|----------|
//! | [`grid`] | the global raster, presence and prediction grids, rasterization |
//! | [`occurrence`] | occurrence records and their CSV form |
//! | [`raster_io`] | the RGRD container, CSV and PGM exports |
//! | [`proximity`] | exact Euclidean distance to the nearest presence cell |
//! | [`metrics`] | probability-weighted chamfer distance, MAP, AUC, ridge R² |
//! | [`losses`] | AN-full, ME-full, ASL and RAL with analytic gradients |
//! | [`encoders`] | sin-cos and spherical-harmonic location features, covariates |
//! | [`model`] | species embeddings, scorers, training, checkpoints |
//!
//! ```
//! use rangekit::grid::{GridSpec, PredictionGrid, PresenceGrid};
//! use rangekit::metrics::{d_pwcd, PwcdConfig};
//! use rangekit::proximity::distance_transform;
//!
//! let spec = GridSpec::from_shape(1, 12).unwrap();
//! let mut truth = PresenceGrid::zeros(spec);
//! truth.set(0, 0, true);
//! let mut p = vec![0.0; 12];
//! p[10] = 1.0; // confident prediction ten pixels from the nearest presence
//! let pred = PredictionGrid::new(spec, p).unwrap();
//! let prox = distance_transform(&truth).unwrap();
//! let d = d_pwcd(&pred, &truth, &prox, &PwcdConfig::default()).unwrap();
//! assert!((d - (1.0 - (-1.0f64).exp()) / 11.0).abs() < 1e-12);
//! ```

mod error;

pub mod encoders;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod occurrence;
pub mod proximity;
pub mod raster_io;

pub use error::{Error, Result};
