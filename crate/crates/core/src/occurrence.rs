//! Presence-only occurrence records and their CSV form.
//!
//! The CSV header is mandatory and must name, in any order:
//! `species_id, latitude, longitude, class, order, family, genus, species`.
//! Extra columns are ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A level of the taxonomic hierarchy, coarsest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rank {
    Class,
    Order,
    Family,
    Genus,
    Species,
}

impl Rank {
    pub const ALL: [Rank; 5] = [Rank::Class, Rank::Order, Rank::Family, Rank::Genus, Rank::Species];

    pub fn as_str(self) -> &'static str {
        match self {
            Rank::Class => "class",
            Rank::Order => "order",
            Rank::Family => "family",
            Rank::Genus => "genus",
            Rank::Species => "species",
        }
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rank {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rank::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown taxonomic rank `{s}`")))
    }
}

/// One presence observation.
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceRecord {
    species_id: String,
    latitude: f64,
    longitude: f64,
    rank_labels: BTreeMap<Rank, String>,
}

impl OccurrenceRecord {
    pub fn new(
        species_id: impl Into<String>,
        latitude: f64,
        longitude: f64,
        rank_labels: BTreeMap<Rank, String>,
    ) -> Result<Self> {
        let species_id = species_id.into();
        if species_id.is_empty() {
            return Err(Error::Input("species_id is empty".into()));
        }
        if !(latitude.is_finite() && (-90.0..=90.0).contains(&latitude)) {
            return Err(Error::Input("latitude out of range".into()));
        }
        if !(longitude.is_finite() && (-180.0..=180.0).contains(&longitude)) {
            return Err(Error::Input("longitude out of range".into()));
        }
        if rank_labels.get(&Rank::Species).is_none_or(|s| s.is_empty()) {
            return Err(Error::Input("species label is missing".into()));
        }
        Ok(Self { species_id, latitude, longitude, rank_labels })
    }

    /// A record whose only rank label is `species = species_id`.
    pub fn with_species(species_id: &str, latitude: f64, longitude: f64) -> Result<Self> {
        let labels = BTreeMap::from([(Rank::Species, species_id.to_string())]);
        Self::new(species_id, latitude, longitude, labels)
    }

    pub fn species_id(&self) -> &str {
        &self.species_id
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    pub fn label(&self, rank: Rank) -> Option<&str> {
        self.rank_labels.get(&rank).map(String::as_str)
    }

    pub fn rank_labels(&self) -> &BTreeMap<Rank, String> {
        &self.rank_labels
    }
}

/// A data row that failed validation. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct OccurrenceTable {
    pub records: Vec<OccurrenceRecord>,
    pub rejects: Vec<RejectedRow>,
}

pub const OCCURRENCE_COLUMNS: [&str; 8] =
    ["species_id", "latitude", "longitude", "class", "order", "family", "genus", "species"];

pub fn load_occurrences(path: impl AsRef<Path>) -> Result<OccurrenceTable> {
    read_occurrences(File::open(path)?)
}

/// Parses occurrence CSV from any reader. Malformed rows are collected in
/// [`OccurrenceTable::rejects`] rather than aborting the load.
pub fn read_occurrences<R: Read>(reader: R) -> Result<OccurrenceTable> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let mut columns = [0usize; 8];
    for (slot, name) in columns.iter_mut().zip(OCCURRENCE_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(name.to_string()))?;
    }

    let mut table = OccurrenceTable::default();
    for (i, row) in csv.records().enumerate() {
        let line = i as u64 + 2;
        let row = match row {
            Ok(row) => row,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                table.rejects.push(RejectedRow { line, reason: e.to_string() });
                continue;
            }
        };
        let field = |k: usize| row.get(columns[k]).unwrap_or("");
        let parsed = parse_coord(field(1), "latitude").and_then(|lat| {
            let lon = parse_coord(field(2), "longitude")?;
            let labels = Rank::ALL
                .into_iter()
                .zip(3..)
                .filter(|&(_, k)| !field(k).is_empty())
                .map(|(rank, k)| (rank, field(k).to_string()))
                .collect();
            OccurrenceRecord::new(field(0), lat, lon, labels)
        });
        match parsed {
            Ok(rec) => table.records.push(rec),
            Err(e) => table.rejects.push(RejectedRow { line, reason: reason_of(e) }),
        }
    }
    if !table.rejects.is_empty() {
        log::warn!("occurrence load: {} malformed rows rejected", table.rejects.len());
    }
    Ok(table)
}

fn parse_coord(text: &str, name: &str) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|_| Error::Input(format!("unparseable {name} `{text}`")))
}

fn reason_of(err: Error) -> String {
    match err {
        Error::Input(msg) => msg,
        other => other.to_string(),
    }
}
