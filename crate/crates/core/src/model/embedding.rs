//! Species and rank embeddings.
//!
//! Embeddings are produced by an external text encoder and arrive as files.
//! Two layouts are accepted:
//!
//! * binary: magic `SEMB`, `u32` count, `u32` dim, then per entry a `u16` key
//!   length, the UTF-8 key and `dim` little-endian f32s;
//! * CSV: `key,v1,…,vd` per line, with an optional header row.
//!
//! Every vector is scaled to unit length on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const SEMB_MAGIC: &[u8; 4] = b"SEMB";

/// A keyed, unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesEmbedding {
    key: String,
    vector: Vec<f64>,
}

impl SpeciesEmbedding {
    /// Normalises `vector` to unit Euclidean length.
    pub fn new(key: impl Into<String>, vector: Vec<f64>) -> Result<Self> {
        let key = key.into();
        if vector.is_empty() {
            return Err(Error::Input(format!("embedding `{key}` is empty")));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("embedding `{key}` has non-finite entries")));
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Input(format!("embedding `{key}` is the zero vector")));
        }
        let vector = vector.into_iter().map(|v| v / norm).collect();
        Ok(Self { key, vector })
    }

    /// Unit-normalised mean of several embeddings, e.g. a genus centroid.
    pub fn mean(key: impl Into<String>, members: &[&SpeciesEmbedding]) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::Input("mean of no embeddings".into()))?;
        let d = first.dim();
        let mut acc = vec![0.0; d];
        for m in members {
            if m.dim() != d {
                return Err(Error::Input("embedding dimensions differ".into()));
            }
            acc.iter_mut().zip(&m.vector).for_each(|(a, v)| *a += v);
        }
        Self::new(key, acc)
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Embeddings of one dimensionality, keyed by species id or rank label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, SpeciesEmbedding>,
}

impl EmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_embeddings(items: impl IntoIterator<Item = SpeciesEmbedding>) -> Result<Self> {
        let mut table = Self::new();
        for e in items {
            table.insert(e)?;
        }
        Ok(table)
    }

    /// Adds an entry; duplicate keys and dimension changes are rejected.
    pub fn insert(&mut self, emb: SpeciesEmbedding) -> Result<()> {
        if self.entries.is_empty() {
            self.dim = emb.dim();
        } else if emb.dim() != self.dim {
            return Err(Error::Format(format!(
                "embedding `{}` has dimension {}, expected {}",
                emb.key(),
                emb.dim(),
                self.dim
            )));
        }
        if self.entries.contains_key(emb.key()) {
            return Err(Error::Format(format!("duplicate embedding key `{}`", emb.key())));
        }
        self.entries.insert(emb.key().to_string(), emb);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&SpeciesEmbedding> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SpeciesEmbedding> {
        self.entries.values()
    }
}

/// Loads a binary or CSV embedding file, detected by its first four bytes.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let bytes = fs::read(path)?;
    parse_embeddings(&bytes)
}

pub fn parse_embeddings(bytes: &[u8]) -> Result<EmbeddingTable> {
    if bytes.starts_with(SEMB_MAGIC) {
        read_semb(bytes)
    } else {
        read_embedding_csv(bytes)
    }
}

pub fn read_semb<R: Read>(mut r: R) -> Result<EmbeddingTable> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(4)? != SEMB_MAGIC {
        return Err(Error::Format("bad embedding magic".into()));
    }
    let count = cur.u32()? as usize;
    let d = cur.u32()? as usize;
    if d == 0 {
        return Err(Error::Format("embedding dimension is zero".into()));
    }
    let mut table = EmbeddingTable::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(cur.take(2)?.try_into().unwrap()) as usize;
        let key = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Format("embedding key is not UTF-8".into()))?
            .to_string();
        let vector = cur
            .take(4 * d)?
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        table.insert(SpeciesEmbedding::new(key, vector).map_err(as_format)?)?;
    }
    if cur.pos != buf.len() {
        return Err(Error::Format("trailing bytes after embeddings".into()));
    }
    Ok(table)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let out = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("embedding file is truncated".into()))?;
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn as_format(e: Error) -> Error {
    match e {
        Error::Input(msg) => Error::Format(msg),
        other => other,
    }
}

pub fn read_embedding_csv<R: Read>(r: R) -> Result<EmbeddingTable> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut table = EmbeddingTable::new();
    for (i, row) in csv.records().enumerate() {
        let row = row?;
        let key = row.get(0).unwrap_or("");
        let values: std::result::Result<Vec<f64>, _> = row.iter().skip(1).map(str::parse::<f64>).collect();
        match values {
            Ok(v) => table.insert(SpeciesEmbedding::new(key, v).map_err(as_format)?)?,
            // The first row may be a header.
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Format(format!("embedding row {} is not numeric", i + 1))),
        }
    }
    if table.is_empty() {
        return Err(Error::Format("no embeddings found".into()));
    }
    Ok(table)
}

/// Writes the binary layout. Vectors are stored as f32.
pub fn write_semb<W: Write>(mut w: W, table: &EmbeddingTable) -> Result<()> {
    w.write_all(SEMB_MAGIC)?;
    w.write_all(&(table.len() as u32).to_le_bytes())?;
    w.write_all(&(table.dim() as u32).to_le_bytes())?;
    for e in table.iter() {
        let key = e.key().as_bytes();
        let len = u16::try_from(key.len()).map_err(|_| Error::Input(format!("key `{}` is too long", e.key())))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(key)?;
        for &v in e.vector() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_embeddings(path: impl AsRef<Path>, table: &EmbeddingTable) -> Result<()> {
    write_semb(std::io::BufWriter::new(fs::File::create(path)?), table)
}

/// Reads a single query vector for zero-shot prediction.
///
/// Accepts a one-entry embedding file in either layout, or bare numbers
/// separated by commas or whitespace. Bare vectors take the file stem as key.
pub fn load_embedding_vector(path: impl AsRef<Path>) -> Result<SpeciesEmbedding> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "query".into());
    let text = std::str::from_utf8(&bytes).ok();
    let bare = text.and_then(|t| {
        t.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<f64>, _>>()
            .ok()
    });
    if let Some(v) = bare.filter(|v| !v.is_empty()) {
        return SpeciesEmbedding::new(stem, v).map_err(as_format);
    }
    let table = parse_embeddings(&bytes)?;
    match table.len() {
        1 => Ok(table.iter().next().unwrap().clone()),
        n => Err(Error::Format(format!("expected one embedding, found {n}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn load_normalises() {
        let e = SpeciesEmbedding::new("a", vec![3.0, 4.0]).unwrap();
        assert_eq!(e.vector(), &[0.6, 0.8]);
        assert!(SpeciesEmbedding::new("z", vec![0.0, 0.0]).is_err());
        assert!(SpeciesEmbedding::new("n", vec![f64::NAN]).is_err());
    }

    #[test]
    fn semb_round_trip() {
        let table = EmbeddingTable::from_embeddings([
            SpeciesEmbedding::new("anas_acuta", vec![1.0, 2.0, 2.0]).unwrap(),
            SpeciesEmbedding::new("genus:Anas", vec![-0.5, 0.25, 7.0]).unwrap(),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_semb(&mut buf, &table).unwrap();
        assert_eq!(&buf[..12], b"SEMB\x02\x00\x00\x00\x03\x00\x00\x00");
        let back = parse_embeddings(&buf).unwrap();
        assert_eq!(back.dim(), 3);
        for e in back.iter() {
            assert!((norm(e.vector()) - 1.0).abs() < 1e-9);
            let orig = table.get(e.key()).unwrap();
            for (a, b) in e.vector().iter().zip(orig.vector()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
        buf.push(0);
        assert!(matches!(parse_embeddings(&buf), Err(Error::Format(_))));
        assert!(matches!(parse_embeddings(&buf[..20]), Err(Error::Format(_))));
    }

    #[test]
    fn csv_with_and_without_header() {
        let plain = parse_embeddings(b"a,1,0\nb,0,2\n").unwrap();
        let headed = parse_embeddings(b"key,v1,v2\na,1,0\nb,0,2\n").unwrap();
        assert_eq!(plain, headed);
        assert_eq!(plain.get("b").unwrap().vector(), &[0.0, 1.0]);
        assert!(parse_embeddings(b"a,1,0\nb,x,2\n").is_err());
        assert!(parse_embeddings(b"a,1,0\nb,1\n").is_err());
        assert!(parse_embeddings(b"a,1,0\na,0,1\n").is_err());
    }

    #[test]
    fn bare_vector_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("unseen.vec");
        fs::write(&p, "1.0 2.0\n2.0").unwrap();
        let e = load_embedding_vector(&p).unwrap();
        assert_eq!(e.key(), "unseen");
        assert!((norm(e.vector()) - 1.0).abs() < 1e-12);

        let q = dir.path().join("one.csv");
        fs::write(&q, "genus:Anas,0,3\n").unwrap();
        assert_eq!(load_embedding_vector(&q).unwrap().key(), "genus:Anas");
    }

    #[test]
    fn mean_is_unit() {
        let a = SpeciesEmbedding::new("a", vec![1.0, 0.0]).unwrap();
        let b = SpeciesEmbedding::new("b", vec![0.0, 1.0]).unwrap();
        let m = SpeciesEmbedding::mean("m", &[&a, &b]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.vector()[0] - h).abs() < 1e-15 && (m.vector()[1] - h).abs() < 1e-15);
    }
}
