//! Model checkpoints.
//!
//! Layout, little-endian:
//!
//! ```text
//! "LDSM" u32 version=1
//! u32 n, n bytes   configuration echo (UTF-8 TOML)
//! u32 rows, u32 cols
//! u64 epochs_done
//! u8 scorer (0 bilinear, 1 cross-attention), u32 d, u32 f, u32 h, u32 window
//! f64 × n_params   parameters
//! f64 × n_params   momentum buffer
//! u32 m, then m × (u64 epoch, f64 loss, u64 steps)
//! ```
//!
//! Parameter blocks appear in [`ModelParams::tensors`] order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::scorer::{ModelParams, ScorerKind};
use super::train::{EpochMetrics, Trainer};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LDSM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_echo: String,
    pub spec: GridSpec,
    pub trainer: Trainer,
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<()> {
    let params = &ckpt.trainer.params;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ckpt.config_echo.len() as u32).to_le_bytes())?;
    w.write_all(ckpt.config_echo.as_bytes())?;
    w.write_all(&(ckpt.spec.rows() as u32).to_le_bytes())?;
    w.write_all(&(ckpt.spec.cols() as u32).to_le_bytes())?;
    w.write_all(&(ckpt.trainer.epochs_done as u64).to_le_bytes())?;
    w.write_all(&[match params.kind() {
        ScorerKind::Bilinear => 0u8,
        ScorerKind::CrossAttention => 1,
    }])?;
    for dim in [params.embedding_dim(), params.feature_dim(), params.hidden_dim(), params.window()] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    for block in [params, &ckpt.trainer.velocity] {
        for t in block.tensors() {
            for v in t {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.write_all(&(ckpt.trainer.metrics.len() as u32).to_le_bytes())?;
    for m in &ckpt.trainer.metrics {
        w.write_all(&(m.epoch as u64).to_le_bytes())?;
        w.write_all(&m.loss.to_le_bytes())?;
        w.write_all(&(m.steps as u64).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn bytes<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(b)
}

fn truncated(e: std::io::Error) -> Error {
    match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("checkpoint is truncated".into()),
        _ => Error::Io(e),
    }
}

fn u32_of<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(bytes(r)?) as usize)
}

fn u64_of<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(bytes(r)?))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    if &bytes::<_, 4>(&mut r)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let version = u32_of(&mut r)?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = u32_of(&mut r)?;
    let mut echo = vec![0u8; n];
    r.read_exact(&mut echo).map_err(truncated)?;
    let config_echo = String::from_utf8(echo).map_err(|_| Error::Format("config echo is not UTF-8".into()))?;
    let (rows, cols) = (u32_of(&mut r)?, u32_of(&mut r)?);
    let spec = GridSpec::from_shape(rows, cols).map_err(|e| Error::Format(e.to_string()))?;
    let epochs_done = u64_of(&mut r)? as usize;
    let kind = match bytes::<_, 1>(&mut r)?[0] {
        0 => ScorerKind::Bilinear,
        1 => ScorerKind::CrossAttention,
        t => return Err(Error::Format(format!("unknown scorer tag {t}"))),
    };
    let (d, f, h, window) = (u32_of(&mut r)?, u32_of(&mut r)?, u32_of(&mut r)?, u32_of(&mut r)?);
    let mut params = ModelParams::zeros(kind, d, f, h, window).map_err(|e| Error::Format(e.to_string()))?;
    let mut velocity = params.zeros_like();
    for block in [&mut params, &mut velocity] {
        for t in block.tensors_mut() {
            for v in t.iter_mut() {
                *v = f64::from_le_bytes(bytes(&mut r)?);
            }
        }
    }
    if !params.is_finite() {
        return Err(Error::Format("checkpoint parameters are not finite".into()));
    }
    let m = u32_of(&mut r)?;
    let mut metrics = Vec::with_capacity(m.min(1 << 20));
    for _ in 0..m {
        let epoch = u64_of(&mut r)? as usize;
        let loss = f64::from_le_bytes(bytes(&mut r)?);
        let steps = u64_of(&mut r)? as usize;
        metrics.push(EpochMetrics { epoch, loss, steps });
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(Checkpoint { config_echo, spec, trainer: Trainer { params, velocity, epochs_done, metrics } })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), ckpt)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn sample(kind: ScorerKind) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = ModelParams::init(kind, 3, 4, 2, 3, 1.0, &mut rng).unwrap();
        let mut velocity = params.zeros_like();
        velocity.bias = -0.25;
        Checkpoint {
            config_echo: "[train]\nseed = 1\n".into(),
            spec: GridSpec::from_shape(4, 8).unwrap(),
            trainer: Trainer {
                params,
                velocity,
                epochs_done: 2,
                metrics: vec![EpochMetrics { epoch: 1, loss: 0.5, steps: 3 }, EpochMetrics { epoch: 2, loss: 0.25, steps: 3 }],
            },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for kind in [ScorerKind::Bilinear, ScorerKind::CrossAttention] {
            let ckpt = sample(kind);
            let mut buf = Vec::new();
            write_checkpoint(&mut buf, &ckpt).unwrap();
            assert_eq!(&buf[..8], b"LDSM\x01\x00\x00\x00");
            assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), ckpt);
        }
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &sample(ScorerKind::Bilinear)).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_checkpoint(&buf[..buf.len() - 3]), Err(Error::Format(_))));
        buf.push(1);
        assert!(matches!(read_checkpoint(buf.as_slice()), Err(Error::Format(_))));
    }
}
