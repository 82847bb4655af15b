use std::f64::consts::SQRT_2;

use rayon::prelude::*;

use super::legendre::{fill_table, tri_index};
use super::LocationFeatures;
use crate::grid::GridSpec;

/// Column of `Y_l^m` in a feature row: `l² + l + m`.
#[inline]
pub fn sh_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Real orthonormal harmonics at one point, for all `l ≤ l_max`.
///
/// `Y_l^0 = P̄_l^0(cos θ)`, `Y_l^m = √2 P̄_l^m(cos θ) cos(mφ)` and
/// `Y_l^{−m} = √2 P̄_l^m(cos θ) sin(mφ)` for `m > 0`, where `θ` is the
/// colatitude and `φ` the longitude.
pub fn sph_harm_row(l_max: usize, latitude: f64, longitude: f64) -> Vec<f64> {
    let mut out = vec![0.0; (l_max + 1) * (l_max + 1)];
    let mut table = vec![0.0; tri_index(l_max, l_max) + 1];
    write_row(l_max, latitude, longitude, &mut table, &mut out);
    out
}

fn write_row(l_max: usize, latitude: f64, longitude: f64, table: &mut [f64], out: &mut [f64]) {
    fill_table(l_max, latitude.to_radians().sin(), table);
    let phi = longitude.to_radians();
    for l in 0..=l_max {
        out[sh_index(l, 0)] = table[tri_index(l, 0)];
        for m in 1..=l {
            let (s, c) = (m as f64 * phi).sin_cos();
            let p = SQRT_2 * table[tri_index(l, m)];
            out[sh_index(l, m as i64)] = p * c;
            out[sh_index(l, -(m as i64))] = p * s;
        }
    }
}

/// Spherical-harmonic features at every cell centre, `dim = (l_max + 1)²`.
pub fn sph_harm_features(spec: &GridSpec, l_max: usize) -> LocationFeatures {
    let dim = (l_max + 1) * (l_max + 1);
    let mut data = vec![0.0; spec.len() * dim];
    data.par_chunks_mut(spec.cols() * dim).enumerate().for_each(|(r, band)| {
        let mut table = vec![0.0; tri_index(l_max, l_max) + 1];
        for (c, out) in band.chunks_mut(dim).enumerate() {
            let (lat, lon) = spec.cell_center(r, c);
            write_row(l_max, lat, lon, &mut table, out);
        }
    });
    LocationFeatures::new(*spec, dim, data).expect("harmonics are finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area_weights(spec: &GridSpec) -> Vec<f64> {
        let dlon = spec.lon_step_deg().to_radians();
        (0..spec.len())
            .map(|i| {
                let (r, _) = spec.row_col(i);
                let top = 90.0 - r as f64 * spec.resolution_deg();
                let bottom = top - spec.resolution_deg();
                (top.to_radians().sin() - bottom.to_radians().sin()) * dlon
            })
            .collect()
    }

    #[test]
    fn degree_zero_is_constant() {
        let spec = GridSpec::from_shape(6, 12).unwrap();
        let f = sph_harm_features(&spec, 0);
        assert_eq!(f.dim(), 1);
        assert!(f.data().iter().all(|&v| (v - 0.282_094_791_773_878_1).abs() < 1e-15));
        assert_eq!(sph_harm_features(&GridSpec::from_shape(2, 4).unwrap(), 20).dim(), 441);
    }

    #[test]
    fn quadrature_gram_is_identity() {
        let spec = GridSpec::from_shape(90, 180).unwrap();
        let l_max = 6;
        let f = sph_harm_features(&spec, l_max);
        let w = area_weights(&spec);
        let dim = f.dim();
        for a in 0..dim {
            for b in a..dim {
                let g: f64 = (0..spec.len()).map(|i| w[i] * f.row(i)[a] * f.row(i)[b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-2, "G[{a},{b}] = {g}");
            }
        }
    }

    #[test]
    fn longitude_shift_rotates_orders() {
        let spec = GridSpec::from_shape(12, 24).unwrap();
        let f = sph_harm_features(&spec, 3);
        let shift = 5;
        let delta = (shift as f64 * spec.lon_step_deg()).to_radians();
        for r in 0..spec.rows() {
            for c in 0..spec.cols() - shift {
                let base = f.row(spec.index(r, c));
                let moved = f.row(spec.index(r, c + shift));
                for l in 0..=3usize {
                    assert!((moved[sh_index(l, 0)] - base[sh_index(l, 0)]).abs() < 1e-12);
                    for m in 1..=l as i64 {
                        let (s, co) = (m as f64 * delta).sin_cos();
                        let (cm, sm) = (base[sh_index(l, m)], base[sh_index(l, -m)]);
                        assert!((moved[sh_index(l, m)] - (co * cm - s * sm)).abs() < 1e-12);
                        assert!((moved[sh_index(l, -m)] - (s * cm + co * sm)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn row_matches_grid() {
        let spec = GridSpec::from_shape(4, 8).unwrap();
        let f = sph_harm_features(&spec, 4);
        let (lat, lon) = spec.cell_center(1, 6);
        assert_eq!(sph_harm_row(4, lat, lon), f.row(spec.index(1, 6)));
    }
}
