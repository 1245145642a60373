//! Training-time regularizers: dropword, inverted dropout at three sites,
//! and Gaussian input noise scaled per embedding dimension.
//!
//! Every transform here is the identity in eval mode; inverted dropout
//! scales kept units by 1/(1-p) at train time so evaluation needs no
//! rescaling.

use serde::{Deserialize, Serialize};

use crate::numeric::{Matrix, Rng, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegConfig {
    /// Dropout on word embeddings x_n.
    pub p_drop_embed: f64,
    /// Dropout on the concatenated LSTM output [hL; hR].
    pub p_drop_lstm_out: f64,
    /// Dropout on the hidden layer a.
    pub p_drop_hidden: f64,
    /// Probability of replacing a context token with <dropped>.
    pub p_dropword: f64,
    /// Multiplier on σᵢ for the Gaussian input noise.
    pub noise_scale: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        RegConfig {
            p_drop_embed: 0.5,
            p_drop_lstm_out: 0.5,
            p_drop_hidden: 0.5,
            p_dropword: 0.1,
            noise_scale: 0.2,
        }
    }
}

impl RegConfig {
    pub fn disabled() -> Self {
        RegConfig {
            p_drop_embed: 0.0,
            p_drop_lstm_out: 0.0,
            p_drop_hidden: 0.0,
            p_dropword: 0.0,
            noise_scale: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("p_drop_embed", self.p_drop_embed),
            ("p_drop_lstm_out", self.p_drop_lstm_out),
            ("p_drop_hidden", self.p_drop_hidden),
            ("p_dropword", self.p_dropword),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(format!("{name} must be in [0, 1), got {p}"));
            }
        }
        if self.noise_scale < 0.0 {
            return Err(format!("noise_scale must be >= 0, got {}", self.noise_scale));
        }
        Ok(())
    }
}

/// Per-dimension standard deviation of the embedding matrix over all
/// vocabulary columns; rescales the input noise after every weight update.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaVector {
    pub sigma: Vector,
}

/// Population standard deviation per embedding dimension (rows of W^x)
/// across all vocabulary columns.
pub fn compute_sigma(embeddings: &Matrix) -> SigmaVector {
    let n = embeddings.cols as f64;
    let mut sigma = Vec::with_capacity(embeddings.rows);
    for i in 0..embeddings.rows {
        let row = embeddings.row(i);
        let mean: f64 = row.iter().sum::<f64>() / n;
        let var: f64 = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        sigma.push(var.max(0.0).sqrt());
    }
    SigmaVector { sigma: Vector::from(sigma) }
}

/// Replaces each context token with `dropped_id` independently with
/// probability `p`, resampled fresh every presentation. The target position
/// is left untouched (it is never an LSTM input anyway).
pub fn dropword(
    tokens: &[usize],
    target_position: usize,
    dropped_id: usize,
    p: f64,
    rng: &mut Rng,
) -> Vec<usize> {
    assert!((0.0..1.0).contains(&p), "dropword p must be in [0, 1)");
    tokens
        .iter()
        .enumerate()
        .map(|(pos, &id)| {
            if pos != target_position && p > 0.0 && rng.bernoulli(p) {
                dropped_id
            } else {
                id
            }
        })
        .collect()
}

/// Inverted dropout mask: entries are 0 with probability p, else 1/(1-p).
pub fn dropout_mask(len: usize, p: f64, rng: &mut Rng) -> Vector {
    assert!((0.0..1.0).contains(&p), "dropout p must be in [0, 1)");
    if p == 0.0 {
        return Vector::ones(len);
    }
    let keep = 1.0 / (1.0 - p);
    Vector::from(
        (0..len)
            .map(|_| if rng.bernoulli(p) { 0.0 } else { keep })
            .collect::<Vec<_>>(),
    )
}

/// Adds N(0, scale·σᵢ) noise per dimension (scale·σᵢ read as a standard
/// deviation). Train mode only.
pub fn gaussian_noise(x: &Vector, sigma: &SigmaVector, scale: f64, rng: &mut Rng) -> Vector {
    assert_eq!(x.len(), sigma.sigma.len(), "noise sigma length mismatch");
    if scale == 0.0 {
        return x.clone();
    }
    Vector::from(
        x.data
            .iter()
            .zip(sigma.sigma.data.iter())
            .map(|(&v, &s)| v + rng.gaussian(0.0, scale * s))
            .collect::<Vec<_>>(),
    )
}
