//! Corpus ingestion, preprocessing, vocabulary and sense-inventory
//! construction, embedding loading, scoring, and checkpointing.

pub mod checkpoint;
pub mod glove;
pub mod jsonl;
pub mod preprocess;
pub mod score;
pub mod senseval;
pub mod vocab;

pub use preprocess::preprocess;
pub use vocab::{SenseInventory, Vocabulary, DROPPED_TAG, NUMBER_TAG, UNKNOWN_TAG};

use serde::{Deserialize, Serialize};

/// One labeled disambiguation example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub lemma: String,
    pub tokens: Vec<String>,
    pub target_position: usize,
    /// Gold sense ids; empty for unlabeled data. A prediction is scored
    /// correct if it matches any of them.
    pub gold: Vec<String>,
}

/// Instance with tokens mapped to vocabulary ids, ready for the model.
#[derive(Debug, Clone)]
pub struct EncodedInstance {
    pub id: String,
    pub lemma: String,
    pub token_ids: Vec<usize>,
    pub target_position: usize,
    /// Index into the lemma's sense list, when a gold label exists.
    pub gold_sense_index: Option<usize>,
}
