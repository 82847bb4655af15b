use std::io::Write;

use crate::error::{Error, Result};

use super::pwcd::PwcdConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub alpha: f64,
    pub distance: f64,
    pub p: f64,
    pub value: f64,
}

/// Per-cell PWCD weight `1 − exp(−α·p·d)` for every `(alpha, distance)` pair
/// at likelihood `p`, alphas outermost.
pub fn alpha_curve(alphas: &[f64], distances: &[f64], p: f64) -> Result<Vec<CurvePoint>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Input(format!("likelihood {p} outside [0, 1]")));
    }
    if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::Input(format!("distance {d} must be finite and non-negative")));
    }
    let mut out = Vec::with_capacity(alphas.len() * distances.len());
    for &alpha in alphas {
        let cfg = PwcdConfig::new(alpha)?;
        out.extend(distances.iter().map(|&distance| CurvePoint { alpha, distance, p, value: cfg.weight(p, distance) }));
    }
    Ok(out)
}

pub fn write_alpha_curve_csv<W: Write>(mut w: W, points: &[CurvePoint]) -> Result<()> {
    writeln!(w, "alpha,distance,p,value")?;
    for pt in points {
        writeln!(w, "{},{},{},{}", pt.alpha, pt.distance, pt.p, pt.value)?;
    }
    w.flush()?;
    Ok(())
}
