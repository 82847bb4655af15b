//! The species-query range model.
//!
//! A species (or taxonomic rank) is represented by an externally produced
//! embedding vector. A scorer combines that vector with fixed per-cell
//! location features to give a presence probability for every grid cell, so
//! one set of parameters maps any embedding, including one never seen during
//! training, to a full range map.

mod checkpoint;
mod config;
mod embedding;
mod scorer;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use config::{FeatureConfig, ModelConfig, RunConfig, TrainConfig};
pub use embedding::{
    load_embedding_vector, load_embeddings, parse_embeddings, read_embedding_csv, read_semb, save_embeddings,
    write_semb, EmbeddingTable, SpeciesEmbedding, SEMB_MAGIC,
};
pub use scorer::{
    attention_weights, predict_range, score_bilinear, score_cross_attention, sigmoid, window_cells, Attention,
    Matrix, ModelParams, Scorer, ScorerKind,
};
pub use train::{species_loss, train, write_metrics_csv, EpochMetrics, StepSample, TrainData, Trainer};

use crate::grid::{rasterize, GridSpec, PresenceGrid};
use crate::occurrence::{OccurrenceRecord, Rank};

/// Ground truth for a taxonomic group: the union of its member species'
/// presences, i.e. every record whose `rank` label equals `label`.
pub fn rank_truth(records: &[OccurrenceRecord], spec: GridSpec, rank: Rank, label: &str) -> PresenceGrid {
    rasterize(spec, records, |r| r.label(rank) == Some(label)).grid
}
