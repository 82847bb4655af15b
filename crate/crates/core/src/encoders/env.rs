//! Environmental covariate stacks.
//!
//! Each channel is an RGRD f32 raster whose shape equals the target grid or
//! differs from it by an integer factor along each axis. Mismatched channels
//! are bilinearly resampled at target cell centres (latitude clamped,
//! longitude wrapped), then every channel is standardised to mean 0 and
//! standard deviation 1 over the cells where all channels are finite.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::LocationFeatures;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::raster_io::load_raster;

/// Standard deviation below which a channel is treated as constant.
const MIN_SD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStack {
    spec: GridSpec,
    channel_names: Vec<String>,
    /// `channels × L`, channel-major.
    data: Vec<f64>,
    valid_mask: Vec<bool>,
    warnings: Vec<String>,
}

impl EnvStack {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let n = self.spec.len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid_mask
    }

    /// Degenerate-channel notices raised while standardising.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Cell-major feature matrix; invalid cells hold zeros.
    pub fn to_features(&self) -> LocationFeatures {
        let (n, k) = (self.spec.len(), self.channels());
        let mut data = vec![0.0; n * k];
        for ch in 0..k {
            for (cell, &v) in self.channel(ch).iter().enumerate() {
                data[cell * k + ch] = v;
            }
        }
        LocationFeatures::new(self.spec, k, data).expect("standardised channels are finite")
    }

    /// Builds a stack from raw in-memory channels already on `spec`.
    pub fn from_channels(spec: GridSpec, channels: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if channels.iter().any(|(_, v)| v.len() != spec.len()) {
            return Err(Error::Input("covariate channel does not match the grid".into()));
        }
        let valid_mask: Vec<bool> =
            (0..spec.len()).map(|i| channels.iter().all(|(_, v)| v[i].is_finite())).collect();
        let n_valid = valid_mask.iter().filter(|&&v| v).count();
        let mut data = Vec::with_capacity(channels.len() * spec.len());
        let mut warnings = Vec::new();
        let mut names = Vec::with_capacity(channels.len());
        for (name, values) in channels {
            let (mean, sd) = if n_valid == 0 {
                (0.0, 0.0)
            } else {
                let cells = || values.iter().zip(&valid_mask).filter(|(_, &ok)| ok).map(|(v, _)| *v);
                let mean = cells().sum::<f64>() / n_valid as f64;
                let var = cells().map(|v| (v - mean).powi(2)).sum::<f64>() / n_valid as f64;
                (mean, var.sqrt())
            };
            let degenerate = sd < MIN_SD;
            if degenerate {
                let msg = format!("channel `{name}` is constant over valid cells; standardised to zeros");
                log::warn!("{msg}");
                warnings.push(msg);
            }
            data.extend(values.iter().zip(&valid_mask).map(|(&v, &ok)| {
                if ok && !degenerate {
                    (v - mean) / sd
                } else {
                    0.0
                }
            }));
            names.push(name);
        }
        Ok(Self { spec, channel_names: names, data, valid_mask, warnings })
    }
}

/// Loads channels named after their file stems.
pub fn load_env<P: AsRef<Path>>(paths: &[P], spec: &GridSpec) -> Result<EnvStack> {
    let named: Vec<(String, PathBuf)> = paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (name, p.to_path_buf())
        })
        .collect();
    load_named(&named, spec)
}

/// `[[channel]]` entries with `name` and `path`; relative paths resolve
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvManifest {
    #[serde(rename = "channel")]
    pub channels: Vec<ManifestChannel>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestChannel {
    pub name: String,
    pub path: PathBuf,
}

pub fn load_env_manifest(manifest: impl AsRef<Path>, spec: &GridSpec) -> Result<EnvStack> {
    let manifest = manifest.as_ref();
    let text = fs::read_to_string(manifest)?;
    let parsed: EnvManifest =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", manifest.display())))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let named: Vec<_> = parsed.channels.into_iter().map(|c| (c.name, base.join(c.path))).collect();
    load_named(&named, spec)
}

fn load_named(named: &[(String, PathBuf)], spec: &GridSpec) -> Result<EnvStack> {
    let mut channels = Vec::with_capacity(named.len());
    for (name, path) in named {
        let (src, values) = load_raster(path)?.into_f32()?;
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let resampled = resample_bilinear(&src, &values, spec)
            .map_err(|e| Error::Format(format!("channel `{name}` ({}): {e}", path.display())))?;
        channels.push((name.clone(), resampled));
    }
    EnvStack::from_channels(*spec, channels)
}

fn integer_ratio(a: usize, b: usize) -> bool {
    a % b == 0 || b % a == 0
}

/// Bilinear resampling between grids whose axes differ by integer factors.
/// Identical shapes are copied unchanged.
pub(crate) fn resample_bilinear(src: &GridSpec, values: &[f64], dst: &GridSpec) -> Result<Vec<f64>> {
    if src == dst {
        return Ok(values.to_vec());
    }
    if !integer_ratio(src.rows(), dst.rows()) || !integer_ratio(src.cols(), dst.cols()) {
        return Err(Error::Format(format!(
            "grid {}x{} is not an integer multiple of {}x{}",
            src.rows(),
            src.cols(),
            dst.rows(),
            dst.cols()
        )));
    }
    let (sr, sc) = (src.rows() as f64, src.cols() as f64);
    let row_scale = sr / dst.rows() as f64;
    let col_scale = sc / dst.cols() as f64;
    let mut out = Vec::with_capacity(dst.len());
    for r in 0..dst.rows() {
        let u = ((r as f64 + 0.5) * row_scale - 0.5).clamp(0.0, sr - 1.0);
        let r0 = u.floor() as usize;
        let r1 = (r0 + 1).min(src.rows() - 1);
        let fr = u - r0 as f64;
        for c in 0..dst.cols() {
            let v = ((c as f64 + 0.5) * col_scale - 0.5).rem_euclid(sc);
            let c0 = v.floor() as usize % src.cols();
            let c1 = (c0 + 1) % src.cols();
            let fc = v - v.floor();
            let at = |rr: usize, cc: usize| values[src.index(rr, cc)];
            let top = at(r0, c0) * (1.0 - fc) + at(r0, c1) * fc;
            let bottom = at(r1, c0) * (1.0 - fc) + at(r1, c1) * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster_io::{save_raster, Raster, RasterData};

    fn spec(r: usize, c: usize) -> GridSpec {
        GridSpec::from_shape(r, c).unwrap()
    }

    #[test]
    fn identity_resample_is_exact() {
        let s = spec(3, 6);
        let v: Vec<f64> = (0..18).map(|i| (i as f64).sin()).collect();
        assert_eq!(resample_bilinear(&s, &v, &s).unwrap(), v);
    }

    #[test]
    fn downsampled_ramp_hits_midpoints() {
        let src = spec(8, 16);
        let dst = spec(4, 8);
        let ramp = |r: f64, c: f64| 3.0 * r - 0.5 * c + 1.0;
        let v: Vec<f64> = (0..src.len()).map(|i| {
            let (r, c) = src.row_col(i);
            ramp(r as f64, c as f64)
        }).collect();
        let out = resample_bilinear(&src, &v, &dst).unwrap();
        for (i, got) in out.iter().enumerate() {
            let (r, c) = dst.row_col(i);
            let want = ramp(2.0 * r as f64 + 0.5, 2.0 * c as f64 + 0.5);
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn non_integer_ratio_is_format_error() {
        assert!(matches!(resample_bilinear(&spec(3, 6), &[0.0; 18], &spec(2, 4)), Err(Error::Format(_))));
    }

    #[test]
    fn standardisation_and_degenerate_channels() {
        let s = spec(2, 3);
        let stack = EnvStack::from_channels(
            s,
            vec![
                ("ramp".into(), vec![1.0, 2.0, 3.0, 4.0, f64::NAN, 6.0]),
                ("flat".into(), vec![5.0; 6]),
            ],
        )
        .unwrap();
        assert_eq!(stack.valid_mask(), &[true, true, true, true, false, true]);
        let ramp = stack.channel(0);
        let valid: Vec<f64> = ramp.iter().zip(stack.valid_mask()).filter(|(_, &ok)| ok).map(|(v, _)| *v).collect();
        let mean = valid.iter().sum::<f64>() / 5.0;
        let sd = (valid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0).sqrt();
        assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-6);
        assert_eq!(ramp[4], 0.0);
        assert!(stack.channel(1).iter().all(|&v| v == 0.0));
        assert_eq!(stack.warnings().len(), 1);
        let feats = stack.to_features();
        assert_eq!(feats.dim(), 2);
        assert_eq!(feats.row(3)[0], ramp[3]);
    }

    #[test]
    fn manifest_loading() {
        let dir = tempfile::tempdir().unwrap();
        let fine = spec(4, 8);
        let values: Vec<f32> = (0..32).map(|i| i as f32).collect();
        save_raster(dir.path().join("a.rgrd"), &Raster { spec: fine, data: RasterData::Float(values.clone()) }).unwrap();
        save_raster(dir.path().join("b.rgrd"), &Raster { spec: spec(2, 4), data: RasterData::Float(vec![1.0; 8]) }).unwrap();
        fs::write(
            dir.path().join("env.toml"),
            "[[channel]]\nname = \"temp\"\npath = \"a.rgrd\"\n[[channel]]\nname = \"elev\"\npath = \"b.rgrd\"\n",
        )
        .unwrap();
        let stack = load_env_manifest(dir.path().join("env.toml"), &fine).unwrap();
        assert_eq!(stack.channel_names(), &["temp".to_string(), "elev".to_string()]);
        assert!(stack.valid_mask().iter().all(|&v| v));

        let by_path = load_env(&[dir.path().join("a.rgrd")], &fine).unwrap();
        assert_eq!(by_path.channel_names(), &["a".to_string()]);
        assert_eq!(by_path.channel(0), stack.channel(0));

        save_raster(dir.path().join("c.rgrd"), &Raster { spec: spec(3, 8), data: RasterData::Float(vec![0.0; 24]) }).unwrap();
        assert!(matches!(load_env(&[dir.path().join("c.rgrd")], &fine), Err(Error::Format(_))));
    }
}
