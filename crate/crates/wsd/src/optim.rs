//! SGD with classical momentum, per-epoch learning-rate decay, incremental
//! σᵢ maintenance, and the finite-difference gradient oracle.

use std::collections::BTreeMap;

use crate::error::{Result, WsdError};
use crate::layers::LstmGrads;
use crate::model::{Gradients, ModelParams};
use crate::numeric::{Matrix, Vector};
use crate::reg::SigmaVector;

/// Momentum velocity and σᵢ running statistics.
///
/// Dense tensors (LSTMs, hidden layer) carry a dense velocity updated every
/// step. Sparse tensors (embedding columns, softmax heads) keep a velocity
/// only for touched entries; on the next touch it is decayed by
/// μ^(steps since last touch). The velocity drift that dense semantics
/// would have applied to untouched parameters in between is skipped, so
/// untouched parameters stay bit-unchanged.
pub struct OptimizerState {
    pub learning_rate: f64,
    pub momentum: f64,
    pub decay: f64,
    pub step_count: u64,
    pub epoch_count: u64,
    /// How many times σᵢ has been refreshed; the training loop asserts this
    /// stays in lockstep with `step_count`.
    pub sigma_updates: u64,
    vel_lstm_left: LstmGrads,
    vel_lstm_right: LstmGrads,
    vel_dense_w: Matrix,
    vel_dense_b: Vector,
    vel_embedding: BTreeMap<usize, (u64, Vector)>,
    vel_heads: BTreeMap<String, (u64, Matrix, Vector)>,
    // per-dimension Σ and Σ² of embedding entries over vocabulary columns
    emb_sum: Vec<f64>,
    emb_sumsq: Vec<f64>,
    vocab_size: usize,
}

/// Exact-recompute cadence for the σᵢ running sums, bounding float drift.
const SIGMA_REFRESH_INTERVAL: u64 = 4096;

impl OptimizerState {
    pub fn new(params: &ModelParams, learning_rate: f64, momentum: f64, decay: f64) -> Self {
        let embed_dim = params.embed_dim;
        let mut state = OptimizerState {
            learning_rate,
            momentum,
            decay,
            step_count: 0,
            epoch_count: 0,
            sigma_updates: 0,
            vel_lstm_left: LstmGrads::zeros(params.hidden, embed_dim),
            vel_lstm_right: LstmGrads::zeros(params.hidden, embed_dim),
            vel_dense_w: Matrix::zeros(params.dense.w.rows, params.dense.w.cols),
            vel_dense_b: Vector::zeros(params.dense.b.len()),
            vel_embedding: BTreeMap::new(),
            vel_heads: BTreeMap::new(),
            emb_sum: vec![0.0; embed_dim],
            emb_sumsq: vec![0.0; embed_dim],
            vocab_size: params.vocab_size(),
        };
        state.recompute_sigma_sums(params);
        state
    }

    fn recompute_sigma_sums(&mut self, params: &ModelParams) {
        for i in 0..params.embed_dim {
            let row = params.embeddings.row(i);
            self.emb_sum[i] = row.iter().sum();
            self.emb_sumsq[i] = row.iter().map(|x| x * x).sum();
        }
    }

    /// Current σᵢ from the running sums (population std per dimension).
    pub fn sigma(&self) -> SigmaVector {
        let n = self.vocab_size as f64;
        let sigma: Vec<f64> = self
            .emb_sum
            .iter()
            .zip(self.emb_sumsq.iter())
            .map(|(&s, &sq)| {
                let mean = s / n;
                (sq / n - mean * mean).max(0.0).sqrt()
            })
            .collect();
        SigmaVector { sigma: Vector::from(sigma) }
    }

    /// v ← μ·v − η·g; θ ← θ + v. Only materialized gradient entries (plus
    /// their velocities) are touched. σᵢ statistics are refreshed for every
    /// modified embedding column before returning.
    pub fn sgd_step(&mut self, params: &mut ModelParams, grads: &Gradients) -> Result<()> {
        if let Some(tensor) = grads.find_non_finite() {
            return Err(WsdError::Numerical(format!(
                "non-finite gradient in `{tensor}` at step {}",
                self.step_count
            )));
        }
        let mu = self.momentum;
        let eta = self.learning_rate;
        self.step_count += 1;
        let now = self.step_count;

        // dense tensors
        let apply_dense_mat = |v: &mut Matrix, theta: &mut Matrix, g: &Matrix| {
            for ((v, t), g) in v.data.iter_mut().zip(theta.data.iter_mut()).zip(g.data.iter()) {
                *v = mu * *v - eta * g;
                *t += *v;
            }
        };
        let apply_dense_vec = |v: &mut Vector, theta: &mut Vector, g: &Vector| {
            for ((v, t), g) in v.data.iter_mut().zip(theta.data.iter_mut()).zip(g.data.iter()) {
                *v = mu * *v - eta * g;
                *t += *v;
            }
        };

        for ((vel, param), grad) in self
            .vel_lstm_left
            .gates_mut()
            .into_iter()
            .zip(params.lstm_left.gates_mut())
            .zip(grads.lstm_left.gates())
        {
            apply_dense_mat(&mut vel.w, &mut param.w, &grad.w);
            apply_dense_mat(&mut vel.u, &mut param.u, &grad.u);
            apply_dense_vec(&mut vel.b, &mut param.b, &grad.b);
        }
        for ((vel, param), grad) in self
            .vel_lstm_right
            .gates_mut()
            .into_iter()
            .zip(params.lstm_right.gates_mut())
            .zip(grads.lstm_right.gates())
        {
            apply_dense_mat(&mut vel.w, &mut param.w, &grad.w);
            apply_dense_mat(&mut vel.u, &mut param.u, &grad.u);
            apply_dense_vec(&mut vel.b, &mut param.b, &grad.b);
        }
        apply_dense_mat(&mut self.vel_dense_w, &mut params.dense.w, &grads.dense_w);
        apply_dense_vec(&mut self.vel_dense_b, &mut params.dense.b, &grads.dense_b);

        // embedding columns (sparse, lazily decayed velocity)
        for (&col, g) in &grads.embedding_cols {
            let entry = self
                .vel_embedding
                .entry(col)
                .or_insert_with(|| (now - 1, Vector::zeros(params.embed_dim)));
            let gap = now - entry.0;
            let decay = mu.powi(gap as i32);
            entry.0 = now;
            for i in 0..params.embed_dim {
                let v = decay * entry.1[i] - eta * g[i];
                entry.1[i] = v;
                let idx = i * self.vocab_size + col;
                let old = params.embeddings.data[idx];
                let new = old + v;
                params.embeddings.data[idx] = new;
                self.emb_sum[i] += new - old;
                self.emb_sumsq[i] += new * new - old * old;
            }
        }

        // softmax heads (sparse, lazily decayed velocity)
        for (lemma, (gw, gb)) in &grads.heads {
            let head = params
                .heads
                .get_mut(lemma)
                .ok_or_else(|| WsdError::UnknownLemma(lemma.clone()))?;
            let entry = self.vel_heads.entry(lemma.clone()).or_insert_with(|| {
                (now - 1, Matrix::zeros(gw.rows, gw.cols), Vector::zeros(gb.len()))
            });
            let gap = now - entry.0;
            let decay = mu.powi(gap as i32);
            entry.0 = now;
            for ((v, t), g) in entry.1.data.iter_mut().zip(head.w.data.iter_mut()).zip(gw.data.iter()) {
                *v = decay * *v - eta * g;
                *t += *v;
            }
            for ((v, t), g) in entry.2.data.iter_mut().zip(head.b.data.iter_mut()).zip(gb.data.iter()) {
                *v = decay * *v - eta * g;
                *t += *v;
            }
        }

        self.sigma_updates += 1;
        if self.step_count % SIGMA_REFRESH_INTERVAL == 0 {
            self.recompute_sigma_sums(params);
        }
        Ok(())
    }

    /// Per-epoch learning-rate decay: η ← decay·η.
    pub fn decay_lr(&mut self) {
        self.learning_rate *= self.decay;
        self.epoch_count += 1;
    }
}

/// Central finite differences of `loss_fn` over every parameter coordinate,
/// keyed by tensor name. `loss_fn` must be deterministic (masks frozen).
pub fn finite_difference_gradient(
    loss_fn: &dyn Fn(&ModelParams) -> f64,
    params: &ModelParams,
    eps: f64,
) -> BTreeMap<String, Vec<f64>> {
    assert!(eps > 0.0);
    let mut out = BTreeMap::new();
    let mut work = params.clone();
    for name in params.tensor_names() {
        let len = params.tensor(&name).unwrap().0.len();
        let mut grad = Vec::with_capacity(len);
        for idx in 0..len {
            let original = work.tensor(&name).unwrap().0[idx];
            work.tensor_mut(&name).unwrap()[idx] = original + eps;
            let plus = loss_fn(&work);
            work.tensor_mut(&name).unwrap()[idx] = original - eps;
            let minus = loss_fn(&work);
            work.tensor_mut(&name).unwrap()[idx] = original;
            grad.push((plus - minus) / (2.0 * eps));
        }
        out.insert(name, grad);
    }
    out
}

/// Worst relative disagreement between analytic and numeric gradients
/// (absolute near zero), with the offending coordinate.
pub fn max_gradient_error(
    analytic: &BTreeMap<String, Vec<f64>>,
    numeric: &BTreeMap<String, Vec<f64>>,
) -> (f64, String) {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for (name, a) in analytic {
        let n = &numeric[name];
        assert_eq!(a.len(), n.len(), "tensor {name} length mismatch");
        for (idx, (&av, &nv)) in a.iter().zip(n.iter()).enumerate() {
            // A coordinate agrees if the relative error is small or the
            // absolute difference is below 1e-8 (central differences cannot
            // resolve tiny gradients to full relative precision). The
            // absolute branch is rescaled so both share the 1e-6 threshold.
            let denom = av.abs().max(nv.abs());
            let abs_err = (av - nv).abs() * 1e2;
            let err = if denom < 1e-12 { abs_err } else { abs_err.min((av - nv).abs() / denom) };
            if err > worst {
                worst = err;
                at = format!("{name}[{idx}]");
            }
        }
    }
    (worst, at)
}
