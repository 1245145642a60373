//! Vocabulary and sense inventory, built from training data only.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WsdError};

use super::{EncodedInstance, Instance};

pub const NUMBER_TAG: &str = "<number>";
pub const DROPPED_TAG: &str = "<dropped>";
pub const UNKNOWN_TAG: &str = "<unknown>";

/// Bidirectional word ↔ id map with dense ids. The reserved tags occupy the
/// first three ids and are always present.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Vocabulary { words: Vec::new(), index: HashMap::new() };
        for tag in [NUMBER_TAG, DROPPED_TAG, UNKNOWN_TAG] {
            v.add(tag);
        }
        v
    }

    /// Rebuilds from an ordered word list (checkpoint load).
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(WsdError::Data(format!("duplicate vocabulary entry `{w}`")));
            }
        }
        for tag in [NUMBER_TAG, DROPPED_TAG, UNKNOWN_TAG] {
            if !index.contains_key(tag) {
                return Err(WsdError::Data(format!("vocabulary missing reserved tag {tag}")));
            }
        }
        Ok(Vocabulary { words, index })
    }

    pub fn add(&mut self, word: &str) -> usize {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.words.len();
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), id);
        id
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Eval-time lookup: out-of-vocabulary words map to `<unknown>`.
    pub fn id_or_unknown(&self, word: &str) -> usize {
        self.id(word).unwrap_or_else(|| self.index[UNKNOWN_TAG])
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn dropped_id(&self) -> usize {
        self.index[DROPPED_TAG]
    }

    pub fn unknown_id(&self) -> usize {
        self.index[UNKNOWN_TAG]
    }
}

/// Ordered sense list per lemma; index = softmax row. Sense order is first
/// occurrence in the training data, with occurrence counts kept for the
/// most-frequent-sense fallback.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SenseInventory {
    lemmas: Vec<String>,
    senses: HashMap<String, Vec<String>>,
    counts: HashMap<String, Vec<usize>>,
}

impl SenseInventory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, lemma: &str, sense: &str) -> usize {
        if !self.senses.contains_key(lemma) {
            self.lemmas.push(lemma.to_string());
            self.senses.insert(lemma.to_string(), Vec::new());
            self.counts.insert(lemma.to_string(), Vec::new());
        }
        let list = self.senses.get_mut(lemma).unwrap();
        let counts = self.counts.get_mut(lemma).unwrap();
        if let Some(i) = list.iter().position(|s| s == sense) {
            counts[i] += 1;
            i
        } else {
            list.push(sense.to_string());
            counts.push(1);
            list.len() - 1
        }
    }

    pub fn senses(&self, lemma: &str) -> Option<&[String]> {
        self.senses.get(lemma).map(|v| v.as_slice())
    }

    pub fn sense_index(&self, lemma: &str, sense: &str) -> Option<usize> {
        self.senses.get(lemma)?.iter().position(|s| s == sense)
    }

    /// Most frequent training sense of a lemma; ties break to the earliest.
    pub fn most_frequent_sense(&self, lemma: &str) -> Option<&str> {
        let counts = self.counts.get(lemma)?;
        let senses = &self.senses[lemma];
        let mut best = 0;
        for i in 1..counts.len() {
            if counts[i] > counts[best] {
                best = i;
            }
        }
        senses.get(best).map(|s| s.as_str())
    }

    pub fn lemmas(&self) -> &[String] {
        &self.lemmas
    }

    /// (lemma, senses, counts) triples in insertion order, for serialization.
    pub fn entries(&self) -> Vec<(String, Vec<String>, Vec<usize>)> {
        self.lemmas
            .iter()
            .map(|l| (l.clone(), self.senses[l].clone(), self.counts[l].clone()))
            .collect()
    }

    pub fn from_entries(entries: Vec<(String, Vec<String>, Vec<usize>)>) -> Result<Self> {
        let mut inv = SenseInventory::new();
        for (lemma, senses, counts) in entries {
            if senses.is_empty() {
                return Err(WsdError::Data(format!("lemma `{lemma}` has no senses")));
            }
            if senses.len() != counts.len() {
                return Err(WsdError::Data(format!("lemma `{lemma}` sense/count length mismatch")));
            }
            if inv.senses.contains_key(&lemma) {
                return Err(WsdError::Data(format!("duplicate lemma `{lemma}`")));
            }
            inv.lemmas.push(lemma.clone());
            inv.senses.insert(lemma.clone(), senses);
            inv.counts.insert(lemma, counts);
        }
        Ok(inv)
    }
}

/// Builds the vocabulary and sense inventory from preprocessed training
/// instances; both are deterministic functions of instance order.
pub fn build_vocab_and_inventory(train: &[Instance]) -> Result<(Vocabulary, SenseInventory)> {
    let mut vocab = Vocabulary::new();
    let mut inventory = SenseInventory::new();
    for inst in train {
        if inst.gold.is_empty() {
            return Err(WsdError::Data(format!(
                "training instance `{}` has no gold sense",
                inst.id
            )));
        }
        for tok in &inst.tokens {
            vocab.add(tok);
        }
        for sense in &inst.gold {
            inventory.add(&inst.lemma, sense);
        }
    }
    Ok((vocab, inventory))
}

/// Encodes a training instance; all tokens are in the vocabulary by
/// construction. The gold index is the first listed gold sense.
pub fn encode_train(inst: &Instance, vocab: &Vocabulary, inventory: &SenseInventory) -> Result<EncodedInstance> {
    let token_ids = inst
        .tokens
        .iter()
        .map(|t| {
            vocab.id(t).ok_or_else(|| {
                WsdError::Data(format!("training token `{t}` not in vocabulary"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gold_sense_index = match inst.gold.first() {
        Some(sense) => Some(inventory.sense_index(&inst.lemma, sense).ok_or_else(|| {
            WsdError::Data(format!("gold sense `{sense}` unknown for lemma `{}`", inst.lemma))
        })?),
        None => None,
    };
    Ok(EncodedInstance {
        id: inst.id.clone(),
        lemma: inst.lemma.clone(),
        token_ids,
        target_position: inst.target_position,
        gold_sense_index,
    })
}

/// Encodes an eval instance; out-of-vocabulary tokens map to `<unknown>`
/// and never extend the vocabulary.
pub fn encode_eval(inst: &Instance, vocab: &Vocabulary) -> EncodedInstance {
    EncodedInstance {
        id: inst.id.clone(),
        lemma: inst.lemma.clone(),
        token_ids: inst.tokens.iter().map(|t| vocab.id_or_unknown(t)).collect(),
        target_position: inst.target_position,
        gold_sense_index: None,
    }
}
