//! Fixtures shared by the CLI test targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rangekit::grid::{GridSpec, PresenceGrid};
use rangekit::model::{save_embeddings, EmbeddingTable, SpeciesEmbedding};
use rangekit::raster_io::save_presence;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn rangekit(args: &[&str]) -> Run {
    rangekit_env(args, &[])
}

pub fn rangekit_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rangekit"));
    cmd.args(args).env_remove("RANGEKIT_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let Output { status, stdout, stderr } = cmd.output().expect("binary runs");
    Run {
        code: status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub const OCC_HEADER: &str = "species_id,latitude,longitude,class,order,family,genus,species";

pub fn write_occurrences(dir: &Path) -> PathBuf {
    let path = dir.join("occ.csv");
    let rows = [
        "anas_acuta,45.1,-93.2,Aves,Anseriformes,Anatidae,Anas,Anas acuta",
        "anas_acuta,45.15,-93.25,Aves,Anseriformes,Anatidae,Anas,Anas acuta",
        "anas_acuta,60.0,-150.0,Aves,Anseriformes,Anatidae,Anas,Anas acuta",
        "anas_crecca,50.0,10.0,Aves,Anseriformes,Anatidae,Anas,Anas crecca",
        "anas_crecca,45.1,-93.2,Aves,Anseriformes,Anatidae,Anas,Anas crecca",
        "aythya_ferina,52.0,13.0,Aves,Anseriformes,Anatidae,Aythya,Aythya ferina",
        "turdus_merula,-33.9,151.2,Aves,Passeriformes,Turdidae,Turdus,Turdus merula",
        "turdus_merula,95.0,151.2,Aves,Passeriformes,Turdidae,Turdus,Turdus merula",
    ];
    fs::write(&path, format!("{OCC_HEADER}\n{}\n", rows.join("\n"))).unwrap();
    path
}

fn great_circle_deg(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let dl = (b.1 - a.1).to_radians();
    (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Range map of a Gaussian bump: cells where `exp(−d²/2σ²) ≥ 1/2`, `d` the
/// great-circle distance in degrees from `centre`.
pub fn bump_range(spec: GridSpec, centre: (f64, f64), sigma: f64) -> PresenceGrid {
    let mut g = PresenceGrid::zeros(spec);
    for i in 0..spec.len() {
        let (r, c) = spec.row_col(i);
        let d = great_circle_deg(spec.cell_center(r, c), centre);
        if (-d * d / (2.0 * sigma * sigma)).exp() >= 0.5 {
            g.set(r, c, true);
        }
    }
    g
}

/// Presence-only observation of a range: `n` cells drawn uniformly from it.
pub fn observe(range: &PresenceGrid, n: usize, rng: &mut ChaCha8Rng) -> PresenceGrid {
    let cells: Vec<usize> = (0..range.values().len()).filter(|&i| range.is_present(i)).collect();
    let spec = *range.spec();
    let mut g = PresenceGrid::zeros(spec);
    for _ in 0..n {
        let (r, c) = spec.row_col(cells[rng.random_range(0..cells.len())]);
        g.set(r, c, true);
    }
    g
}

pub fn random_embedding(key: &str, d: usize, rng: &mut ChaCha8Rng) -> SpeciesEmbedding {
    SpeciesEmbedding::new(key, (0..d).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

/// Synthetic species with bump ranges on a 64×128 grid, written as truth
/// grids plus an embedding file.
pub struct Toy {
    pub truth_dir: PathBuf,
    pub embeddings: PathBuf,
    pub ranges: Vec<PresenceGrid>,
    pub table: EmbeddingTable,
}

pub fn toy_species(dir: &Path, n: usize, seed: u64) -> Toy {
    let spec = GridSpec::from_shape(64, 128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth_dir = dir.join("truth");
    fs::create_dir_all(&truth_dir).unwrap();
    let mut ranges = Vec::new();
    let mut table = EmbeddingTable::new();
    for s in 0..n {
        let key = format!("sp{s}");
        let centre = (rng.random_range(-50.0..50.0), rng.random_range(-170.0..170.0));
        let range = bump_range(spec, centre, 15.0);
        save_presence(truth_dir.join(format!("{key}.rgrd")), &range).unwrap();
        table.insert(random_embedding(&key, 16, &mut rng)).unwrap();
        ranges.push(range);
    }
    let embeddings = dir.join("emb.semb");
    save_embeddings(&embeddings, &table).unwrap();
    Toy { truth_dir, embeddings, ranges, table }
}

pub fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}
