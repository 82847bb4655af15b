//! Orthonormalised associated Legendre functions.
//!
//! `P̄_l^m(x) = sqrt((2l+1)/(4π) · (l−m)!/(l+m)!) · P_l^m(x)`, without the
//! Condon–Shortley phase. With this scaling `P̄_l^0(cos θ)` is the zonal
//! harmonic `Y_l^0(θ)`, and the real harmonics of order `m ≠ 0` are
//! `sqrt(2) · P̄_l^|m|` times `cos(mφ)` or `sin(|m|φ)`.
//!
//! Values come from the standard stable recurrences: the diagonal
//! `P̄_m^m = sqrt((2m+1)/(2m)) · sqrt(1−x²) · P̄_{m−1}^{m−1}`, the first
//! off-diagonal `P̄_{m+1}^m = sqrt(2m+3) · x · P̄_m^m`, then the three-term
//! recurrence in `l` at fixed `m`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[inline]
pub(crate) fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// All `P̄_l^m(x)` for `0 ≤ m ≤ l ≤ l_max`, stored at `l(l+1)/2 + m`.
pub fn legendre_table(l_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; tri_index(l_max, l_max) + 1];
    fill_table(l_max, x, &mut out);
    out
}

pub(crate) fn fill_table(l_max: usize, x: f64, out: &mut [f64]) {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut diag = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            diag *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        out[tri_index(m, m)] = diag;
        if m == l_max {
            break;
        }
        out[tri_index(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * diag;
        for l in m + 2..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            out[tri_index(l, m)] = a * (x * out[tri_index(l - 1, m)] - b * out[tri_index(l - 2, m)]);
        }
    }
}

/// A single orthonormalised associated Legendre value `P̄_l^m(x)`.
pub fn legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Input(format!("order m = {m} exceeds degree l = {l}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Input(format!("argument {x} outside [-1, 1]")));
    }
    Ok(legendre_table(l, x)[tri_index(l, m)])
}
