//! Distance from every cell to its nearest presence cell.
//!
//! Distances are planar Euclidean in pixel-index units, with no wrap-around
//! in longitude. [`distance_transform`] is exact: it runs the lower-envelope
//! squared-distance transform once down the columns and once along the rows,
//! so every output is the square root of an integer.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PresenceGrid};
use crate::raster_io::{Raster, RasterData};

/// Largest grid [`brute_force_nn`] accepts.
pub const BRUTE_FORCE_MAX_CELLS: usize = 10_000;

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Nearest-presence distance per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityField {
    spec: GridSpec,
    distances: Vec<f32>,
}

impl ProximityField {
    pub fn new(spec: GridSpec, distances: Vec<f32>) -> Result<Self> {
        if distances.len() != spec.len() {
            return Err(Error::Input(format!(
                "proximity field has {} values, expected {}",
                distances.len(),
                spec.len()
            )));
        }
        if distances.iter().any(|d| d.is_nan() || *d < 0.0) {
            return Err(Error::Input("proximity distances must be non-negative".into()));
        }
        Ok(Self { spec, distances })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn distances(&self) -> &[f32] {
        &self.distances
    }

    #[inline]
    pub fn at(&self, index: usize) -> f64 {
        f64::from(self.distances[index])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.at(self.spec.index(row, col))
    }

    pub fn max(&self) -> f64 {
        self.distances.iter().copied().fold(0.0f32, f32::max).into()
    }

    pub fn to_raster(&self) -> Raster {
        Raster { spec: self.spec, data: RasterData::Float(self.distances.clone()) }
    }
}

/// Exact Euclidean distance transform of `presence`.
pub fn distance_transform(presence: &PresenceGrid) -> Result<ProximityField> {
    if presence.n_positive() == 0 {
        return Err(Error::Domain("no presence cells".into()));
    }
    let spec = *presence.spec();
    let (rows, cols) = (spec.rows(), spec.cols());

    // Column pass on a transposed buffer so each column is contiguous.
    let mut by_col = vec![f64::INFINITY; spec.len()];
    for (i, &v) in presence.values().iter().enumerate() {
        if v == 1 {
            let (r, c) = spec.row_col(i);
            by_col[c * rows + r] = 0.0;
        }
    }
    by_col.par_chunks_mut(rows).for_each_init(|| Envelope::new(rows), |env, line| env.transform(line));

    let mut by_row = vec![0.0; spec.len()];
    for c in 0..cols {
        for r in 0..rows {
            by_row[r * cols + c] = by_col[c * rows + r];
        }
    }
    by_row.par_chunks_mut(cols).for_each_init(|| Envelope::new(cols), |env, line| env.transform(line));

    let distances = by_row.into_iter().map(|sq| sq.sqrt() as f32).collect();
    Ok(ProximityField { spec, distances })
}

/// Scratch space for the 1-D lower envelope of parabolas.
struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
    out: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self { sites: vec![0; n], bounds: vec![0.0; n + 1], out: vec![0.0; n] }
    }

    /// Replaces `f` by `min_q (p − q)² + f[q]`. Infinite entries are not sites.
    fn transform(&mut self, f: &mut [f64]) {
        let n = f.len();
        let Some(first) = f.iter().position(|v| v.is_finite()) else {
            return;
        };
        let (v, z) = (&mut self.sites, &mut self.bounds);
        let mut k = 0;
        v[0] = first;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for q in first + 1..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + (q * q) as f64;
            let mut s;
            loop {
                let p = v[k];
                s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
                if s <= z[k] && k > 0 {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        let mut k = 0;
        for (q, out) in self.out[..n].iter_mut().enumerate() {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let d = q as f64 - v[k] as f64;
            *out = d * d + f[v[k]];
        }
        f.copy_from_slice(&self.out[..n]);
    }
}

/// Distance between two cells.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DistanceMetric {
    /// Euclidean distance between `(row, col)` indices.
    #[default]
    Pixel,
    /// Great-circle distance in kilometres between cell centres.
    Haversine,
}

impl DistanceMetric {
    pub fn between(self, spec: &GridSpec, a: (usize, usize), b: (usize, usize)) -> f64 {
        match self {
            DistanceMetric::Pixel => {
                let dr = a.0 as f64 - b.0 as f64;
                let dc = a.1 as f64 - b.1 as f64;
                (dr * dr + dc * dc).sqrt()
            }
            DistanceMetric::Haversine => {
                let (la1, lo1) = spec.cell_center(a.0, a.1);
                let (la2, lo2) = spec.cell_center(b.0, b.1);
                haversine_km(la1, lo1, la2, lo2)
            }
        }
    }
}

pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Exhaustive nearest-presence search in pixel units. Test oracle for
/// [`distance_transform`]; refuses grids above [`BRUTE_FORCE_MAX_CELLS`].
pub fn brute_force_nn(presence: &PresenceGrid) -> Result<ProximityField> {
    brute_force_nn_with(presence, DistanceMetric::Pixel)
}

pub fn brute_force_nn_with(presence: &PresenceGrid, metric: DistanceMetric) -> Result<ProximityField> {
    let spec = *presence.spec();
    if spec.len() > BRUTE_FORCE_MAX_CELLS {
        return Err(Error::Input(format!(
            "brute-force search limited to {BRUTE_FORCE_MAX_CELLS} cells, grid has {}",
            spec.len()
        )));
    }
    let sites: Vec<_> = (0..spec.len())
        .filter(|&i| presence.is_present(i))
        .map(|i| spec.row_col(i))
        .collect();
    if sites.is_empty() {
        return Err(Error::Domain("no presence cells".into()));
    }
    let distances = (0..spec.len())
        .map(|i| {
            let x = spec.row_col(i);
            sites
                .iter()
                .map(|&z| metric.between(&spec, x, z))
                .fold(f64::INFINITY, f64::min) as f32
        })
        .collect();
    Ok(ProximityField { spec, distances })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn grid(rows: usize, cols: usize, cells: &[(usize, usize)]) -> PresenceGrid {
        let mut g = PresenceGrid::zeros(GridSpec::from_shape(rows, cols).unwrap());
        for &(r, c) in cells {
            g.set(r, c, true);
        }
        g
    }

    fn random_grid(rng: &mut ChaCha8Rng, max_side: usize) -> PresenceGrid {
        let rows = rng.random_range(1..=max_side);
        let cols = rng.random_range(1..=max_side);
        let density = rng.random_range(0.005..0.3);
        let mut g = PresenceGrid::zeros(GridSpec::from_shape(rows, cols).unwrap());
        for r in 0..rows {
            for c in 0..cols {
                g.set(r, c, rng.random_bool(density));
            }
        }
        if g.n_positive() == 0 {
            g.set(rng.random_range(0..rows), rng.random_range(0..cols), true);
        }
        g
    }

    #[test]
    fn center_of_three() {
        let f = distance_transform(&grid(1, 3, &[(0, 1)])).unwrap();
        assert_eq!(f.distances(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn full_presence_is_zero() {
        let spec = GridSpec::from_shape(4, 5).unwrap();
        let g = PresenceGrid::new(spec, vec![1; 20]).unwrap();
        assert!(distance_transform(&g).unwrap().distances().iter().all(|&d| d == 0.0));
        assert!(brute_force_nn(&g).unwrap().distances().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn two_by_two_corner() {
        let g = grid(2, 2, &[(0, 0)]);
        let expected = [0.0, 1.0, 1.0, 2f64.sqrt() as f32];
        assert_eq!(brute_force_nn(&g).unwrap().distances(), &expected);
        assert_eq!(distance_transform(&g).unwrap().distances(), &expected);
    }

    #[test]
    fn empty_grid_is_domain_error() {
        let g = grid(3, 3, &[]);
        assert!(matches!(distance_transform(&g), Err(Error::Domain(_))));
        assert!(matches!(brute_force_nn(&g), Err(Error::Domain(_))));
    }

    #[test]
    fn brute_force_guard() {
        let g = grid(101, 100, &[(0, 0)]);
        assert!(matches!(brute_force_nn(&g), Err(Error::Input(_))));
    }

    #[test]
    fn matches_brute_force_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let g = random_grid(&mut rng, 16);
            let fast = distance_transform(&g).unwrap();
            let slow = brute_force_nn(&g).unwrap();
            for (a, b) in fast.distances().iter().zip(slow.distances()) {
                assert!((f64::from(*a) - f64::from(*b)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn corner_distance_on_fifth_degree_grid() {
        let g = grid(900, 1800, &[(0, 0)]);
        let f = distance_transform(&g).unwrap();
        let corner = (899f64.powi(2) + 1799f64.powi(2)).sqrt();
        assert!((f.max() - corner).abs() < 1e-3, "{}", f.max());
        assert!((f.get(899, 1799) - corner).abs() < 1e-3);
        // The dimension-based bound sqrt(900² + 1800²) ≈ 2012.46 is never reached.
        assert!(f.max() < (900f64.powi(2) + 1800f64.powi(2)).sqrt());
    }

    #[test]
    fn haversine_metric() {
        assert!((haversine_km(0.0, 0.0, 0.0, 180.0) - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-6);
        let g = grid(18, 36, &[(9, 18)]);
        let f = brute_force_nn_with(&g, DistanceMetric::Haversine).unwrap();
        assert_eq!(f.get(9, 18), 0.0);
        // One cell east along the equator band is 10 degrees of longitude at latitude -5.
        let expected = haversine_km(-5.0, 5.0, -5.0, 15.0);
        assert!((f.get(9, 19) - expected).abs() < 1e-2);
    }

    fn arb_grid(max: usize) -> impl Strategy<Value = PresenceGrid> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            prop::collection::vec(prop::bool::weighted(0.1), r * c).prop_map(move |mut mask| {
                mask[0] |= !mask.iter().any(|&b| b);
                PresenceGrid::from_mask(GridSpec::from_shape(r, c).unwrap(), &mask).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn equals_brute_force(g in arb_grid(32)) {
            prop_assert_eq!(distance_transform(&g).unwrap(), brute_force_nn(&g).unwrap());
        }

        #[test]
        fn transpose_symmetry(g in arb_grid(20)) {
            let a = distance_transform(&g).unwrap();
            let b = distance_transform(&g.transpose()).unwrap();
            let spec = *g.spec();
            for r in 0..spec.rows() {
                for c in 0..spec.cols() {
                    prop_assert_eq!(a.get(r, c), b.get(c, r));
                }
            }
        }

        #[test]
        fn lipschitz_and_bounded(g in arb_grid(12)) {
            let f = distance_transform(&g).unwrap();
            let spec = *g.spec();
            let diag = ((spec.rows().pow(2) + spec.cols().pow(2)) as f64).sqrt();
            for a in 0..spec.len() {
                prop_assert!(f.at(a) <= diag);
                prop_assert_eq!(f.at(a) == 0.0, g.is_present(a));
                for b in 0..spec.len() {
                    let e = DistanceMetric::Pixel.between(&spec, spec.row_col(a), spec.row_col(b));
                    prop_assert!((f.at(a) - f.at(b)).abs() <= e + 1e-6);
                }
            }
        }

        #[test]
        fn adding_presence_never_increases(g in arb_grid(16), pick in any::<prop::sample::Index>()) {
            let before = distance_transform(&g).unwrap();
            let mut more = g.clone();
            let i = pick.index(g.spec().len());
            let (r, c) = g.spec().row_col(i);
            more.set(r, c, true);
            let after = distance_transform(&more).unwrap();
            for (a, b) in after.distances().iter().zip(before.distances()) {
                prop_assert!(a <= b);
            }
        }
    }
}
