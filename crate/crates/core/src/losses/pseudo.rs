//! Area-uniform pseudo-negative locations outside a buffer around presences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PresenceGrid};
use crate::proximity::{distance_transform, ProximityField};

/// Draw count after which the acceptance rate is checked.
const REJECTION_WINDOW: u64 = 1_000_000;
/// Minimum acceptance rate once [`REJECTION_WINDOW`] draws have been made.
const MIN_ACCEPTANCE: f64 = 1e-3;

/// Draws locations uniformly over the sphere and keeps those whose cell lies
/// farther than `buffer_cells` pixels from every presence cell.
#[derive(Debug, Clone)]
pub struct PseudoNegativeSampler {
    spec: GridSpec,
    prox: Option<ProximityField>,
    buffer_cells: f64,
}

impl PseudoNegativeSampler {
    pub fn new(truth: &PresenceGrid, buffer_cells: f64) -> Result<Self> {
        if !(buffer_cells.is_finite() && buffer_cells >= 0.0) {
            return Err(Error::Config(format!("buffer_cells must be non-negative, got {buffer_cells}")));
        }
        let prox = match truth.n_positive() {
            0 => None,
            _ => Some(distance_transform(truth)?),
        };
        Ok(Self { spec: *truth.spec(), prox, buffer_cells })
    }

    /// Builds a sampler from a precomputed proximity field.
    pub fn with_proximity(prox: ProximityField, buffer_cells: f64) -> Self {
        Self { spec: *prox.spec(), prox: Some(prox), buffer_cells }
    }

    fn accepts(&self, index: usize) -> bool {
        self.prox.as_ref().is_none_or(|p| p.at(index) > self.buffer_cells)
    }

    /// Draws `n` cells. Longitude is uniform and latitude is `asin(u)` for
    /// uniform `u ∈ [−1, 1]`, which makes the draw uniform in area.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::with_capacity(n);
        let mut draws: u64 = 0;
        while out.len() < n {
            let lon: f64 = rng.random_range(-180.0..180.0);
            let lat = rng.random_range(-1.0f64..=1.0).asin().to_degrees();
            let (r, c) = self.spec.cell_of(lat, lon)?;
            draws += 1;
            if self.accepts(self.spec.index(r, c)) {
                out.push((r, c));
            } else if draws >= REJECTION_WINDOW && (out.len() as f64) < MIN_ACCEPTANCE * draws as f64 {
                return Err(Error::Domain("buffer excludes the sphere".into()));
            }
        }
        Ok(out)
    }
}

/// Seeded convenience wrapper around [`PseudoNegativeSampler`].
pub fn sample_pseudo_negatives(truth: &PresenceGrid, n: usize, buffer_cells: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PseudoNegativeSampler::new(truth, buffer_cells)?.sample(n, &mut rng)
}
