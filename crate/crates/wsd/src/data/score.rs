//! Precision/recall/F1 scoring over gold-labeled instances.

use std::collections::BTreeMap;

use serde::Serialize;

/// Gold labels: instance id → (lemma, acceptable senses). A prediction is
/// correct if it matches any listed sense.
pub type GoldLabels = BTreeMap<String, (String, Vec<String>)>;

#[derive(Debug, Clone, Default, Serialize)]
pub struct LemmaScore {
    pub attempted: usize,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub attempted: usize,
    pub correct: usize,
    pub total: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_lemma: BTreeMap<String, LemmaScore>,
    /// Predictions for ids absent from the gold set; warned, never scored.
    pub stray_predictions: usize,
}

/// Scores predictions against gold. Only gold-listed ids are scored;
/// attempted = predictions covering gold ids, total = |gold|.
pub fn score(predictions: &BTreeMap<String, String>, gold: &GoldLabels) -> EvaluationReport {
    let mut attempted = 0usize;
    let mut correct = 0usize;
    let mut per_lemma: BTreeMap<String, LemmaScore> = BTreeMap::new();

    for (id, (lemma, senses)) in gold {
        let entry = per_lemma.entry(lemma.clone()).or_default();
        entry.total += 1;
        if let Some(pred) = predictions.get(id) {
            attempted += 1;
            entry.attempted += 1;
            if senses.iter().any(|s| s == pred) {
                correct += 1;
                entry.correct += 1;
            }
        }
    }
    let stray = predictions.keys().filter(|id| !gold.contains_key(*id)).count();

    let total = gold.len();
    let precision = if attempted > 0 { correct as f64 / attempted as f64 } else { 0.0 };
    let recall = if total > 0 { correct as f64 / total as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };

    EvaluationReport {
        attempted,
        correct,
        total,
        precision,
        recall,
        f1,
        per_lemma,
        stray_predictions: stray,
    }
}
