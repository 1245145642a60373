//! The full disambiguation network: embedding lookup, two LSTMs flanking the
//! target word, a shared linear hidden layer, and a per-lemma softmax head.
//!
//! The target word's own embedding is never fed to either LSTM; the left
//! LSTM reads tokens strictly before the target (left to right) and the
//! right LSTM reads tokens strictly after it (right to left). A target at a
//! document edge leaves that side's state at zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::data::{EncodedInstance, SenseInventory, Vocabulary};
use crate::error::{Result, WsdError};
use crate::layers::{
    dense_backward, dense_forward, lstm_backward, lstm_run, DenseParams, Direction, LstmGrads,
    LstmParams, LstmTrace,
};
use crate::numeric::{cross_entropy, softmax, Matrix, Rng, Vector};
use crate::reg::{dropout_mask, dropword, gaussian_noise, RegConfig, SigmaVector};

/// Per-lemma output layer; rows are that lemma's senses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxHead {
    pub w: Matrix, // |S(w)| x |a|
    pub b: Vector, // |S(w)|
}

/// Every trainable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embed_dim: usize,
    pub hidden: usize,
    pub hidden_layer: usize,
    /// embed_dim x |V|, one column per vocabulary id.
    pub embeddings: Matrix,
    pub lstm_left: LstmParams,
    pub lstm_right: LstmParams,
    pub dense: DenseParams,
    pub heads: BTreeMap<String, SoftmaxHead>,
}

impl ModelParams {
    pub fn vocab_size(&self) -> usize {
        self.embeddings.cols
    }

    /// Column lookup realizing the one-hot product with W^x.
    pub fn embed(&self, token_id: usize) -> Result<Vector> {
        if token_id >= self.vocab_size() {
            return Err(WsdError::VocabIdOutOfRange { id: token_id, vocab_size: self.vocab_size() });
        }
        Ok(self.embeddings.column(token_id))
    }

    pub fn head(&self, lemma: &str) -> Result<&SoftmaxHead> {
        self.heads.get(lemma).ok_or_else(|| WsdError::UnknownLemma(lemma.to_string()))
    }

    /// Stable tensor naming shared by the checkpoint format, the optimizer,
    /// and the finite-difference oracle.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["embeddings".to_string()];
        for side in ["lstm_left", "lstm_right"] {
            for gate in ["input", "forget", "output", "candidate"] {
                for field in ["w", "u", "b"] {
                    names.push(format!("{side}.{gate}.{field}"));
                }
            }
        }
        names.push("dense.w".to_string());
        names.push("dense.b".to_string());
        for lemma in self.heads.keys() {
            names.push(format!("head.{lemma}.w"));
            names.push(format!("head.{lemma}.b"));
        }
        names
    }

    fn lstm_field<'a>(lstm: &'a LstmParams, gate: &str, field: &str) -> Option<(&'a [f64], Vec<usize>)> {
        let g = match gate {
            "input" => &lstm.input,
            "forget" => &lstm.forget,
            "output" => &lstm.output,
            "candidate" => &lstm.candidate,
            _ => return None,
        };
        Some(match field {
            "w" => (&g.w.data[..], vec![g.w.rows, g.w.cols]),
            "u" => (&g.u.data[..], vec![g.u.rows, g.u.cols]),
            "b" => (&g.b.data[..], vec![g.b.len()]),
            _ => return None,
        })
    }

    /// Tensor data and shape by name.
    pub fn tensor(&self, name: &str) -> Option<(&[f64], Vec<usize>)> {
        if name == "embeddings" {
            return Some((&self.embeddings.data, vec![self.embeddings.rows, self.embeddings.cols]));
        }
        if name == "dense.w" {
            return Some((&self.dense.w.data, vec![self.dense.w.rows, self.dense.w.cols]));
        }
        if name == "dense.b" {
            return Some((&self.dense.b.data, vec![self.dense.b.len()]));
        }
        if let Some(rest) = name.strip_prefix("head.") {
            let (lemma, field) = rest.rsplit_once('.')?;
            let head = self.heads.get(lemma)?;
            return Some(match field {
                "w" => (&head.w.data[..], vec![head.w.rows, head.w.cols]),
                "b" => (&head.b.data[..], vec![head.b.len()]),
                _ => return None,
            });
        }
        for side in ["lstm_left", "lstm_right"] {
            if let Some(rest) = name.strip_prefix(&format!("{side}.")) {
                let (gate, field) = rest.split_once('.')?;
                let lstm = if side == "lstm_left" { &self.lstm_left } else { &self.lstm_right };
                return Self::lstm_field(lstm, gate, field);
            }
        }
        None
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        if name == "embeddings" {
            return Some(&mut self.embeddings.data);
        }
        if name == "dense.w" {
            return Some(&mut self.dense.w.data);
        }
        if name == "dense.b" {
            return Some(&mut self.dense.b.data);
        }
        if let Some(rest) = name.strip_prefix("head.") {
            let (lemma, field) = rest.rsplit_once('.')?;
            let head = self.heads.get_mut(lemma)?;
            return Some(match field {
                "w" => &mut head.w.data[..],
                "b" => &mut head.b.data[..],
                _ => return None,
            });
        }
        for side in ["lstm_left", "lstm_right"] {
            if let Some(rest) = name.strip_prefix(&format!("{side}.")) {
                let (gate, field) = rest.split_once('.')?;
                let lstm = if side == "lstm_left" {
                    &mut self.lstm_left
                } else {
                    &mut self.lstm_right
                };
                let g = match gate {
                    "input" => &mut lstm.input,
                    "forget" => &mut lstm.forget,
                    "output" => &mut lstm.output,
                    "candidate" => &mut lstm.candidate,
                    _ => return None,
                };
                return Some(match field {
                    "w" => &mut g.w.data[..],
                    "u" => &mut g.u.data[..],
                    "b" => &mut g.b.data[..],
                    _ => return None,
                });
            }
        }
        None
    }
}

/// Zero-valued parameter set with the right shapes.
pub fn zero_params(
    vocab: &Vocabulary,
    inventory: &SenseInventory,
    config: &TrainConfig,
) -> ModelParams {
    let mut heads = BTreeMap::new();
    for lemma in inventory.lemmas() {
        let n = inventory.senses(lemma).unwrap().len();
        heads.insert(
            lemma.clone(),
            SoftmaxHead { w: Matrix::zeros(n, config.hidden_layer), b: Vector::zeros(n) },
        );
    }
    ModelParams {
        embed_dim: config.embed_dim,
        hidden: config.hidden,
        hidden_layer: config.hidden_layer,
        embeddings: Matrix::zeros(config.embed_dim, vocab.len()),
        lstm_left: LstmParams::zeros(config.hidden, config.embed_dim),
        lstm_right: LstmParams::zeros(config.hidden, config.embed_dim),
        dense: DenseParams::zeros(config.hidden_layer, 2 * config.hidden),
        heads,
    }
}

/// Initializes all parameters: embedding columns from the pretrained table
/// where the word exists (with lowercase fallback), otherwise N(0, 0.1);
/// every other weight from U(-0.1, 0.1).
pub fn init_params(
    vocab: &Vocabulary,
    inventory: &SenseInventory,
    config: &TrainConfig,
    rng: &mut Rng,
    pretrained: Option<&crate::data::glove::GloveTable>,
) -> Result<ModelParams> {
    if let Some(table) = pretrained {
        if table.dim != config.embed_dim {
            return Err(WsdError::Shape {
                tensor: "embeddings".into(),
                expected: format!("pretrained dim {}", config.embed_dim),
                actual: format!("{}", table.dim),
            });
        }
    }
    let mut params = zero_params(vocab, inventory, config);

    let mut emb_rng = rng.split(1);
    for id in 0..vocab.len() {
        let word = vocab.word(id).unwrap();
        let col = match pretrained.and_then(|t| t.lookup(word)) {
            Some(v) => v.clone(),
            None => emb_rng.gaussian_vec(0.0, 0.1, config.embed_dim),
        };
        params.embeddings.set_column(id, &col);
    }

    let mut net_rng = rng.split(2);
    params.lstm_left = LstmParams::init(config.hidden, config.embed_dim, &mut net_rng, config.forget_bias_one);
    params.lstm_right = LstmParams::init(config.hidden, config.embed_dim, &mut net_rng, config.forget_bias_one);
    params.dense = DenseParams::init(config.hidden_layer, 2 * config.hidden, &mut net_rng);
    for lemma in inventory.lemmas() {
        let n = inventory.senses(lemma).unwrap().len();
        let head = params.heads.get_mut(lemma).unwrap();
        head.w = Matrix {
            rows: n,
            cols: config.hidden_layer,
            data: net_rng.uniform_vec(-0.1, 0.1, n * config.hidden_layer).data,
        };
        head.b = net_rng.uniform_vec(-0.1, 0.1, n);
    }
    Ok(params)
}

/// Regularization record for one presentation; replayed exactly in backward
/// and by the finite-difference oracle.
#[derive(Debug, Clone)]
pub struct RegMasks {
    /// Token ids after dropword (full context, target untouched).
    pub ids: Vec<usize>,
    /// Additive Gaussian noise per position (zeros at the target).
    pub noise: Vec<Vector>,
    /// Inverted-dropout mask on each embedding (ones at the target).
    pub embed_mask: Vec<Vector>,
    /// Mask on the concatenated [hL; hR].
    pub lstm_out_mask: Vector,
    /// Mask on the hidden layer a.
    pub hidden_mask: Vector,
}

/// Samples fresh masks for one presentation of `enc`. Transform order:
/// dropword → embed → Gaussian noise → embedding dropout.
pub fn sample_masks(
    enc: &EncodedInstance,
    embed_dim: usize,
    hidden: usize,
    hidden_layer: usize,
    reg: &RegConfig,
    sigma: &SigmaVector,
    dropped_id: usize,
    rng: &mut Rng,
) -> RegMasks {
    let ids = dropword(&enc.token_ids, enc.target_position, dropped_id, reg.p_dropword, rng);
    let mut noise = Vec::with_capacity(ids.len());
    let mut embed_mask = Vec::with_capacity(ids.len());
    for pos in 0..ids.len() {
        if pos == enc.target_position {
            noise.push(Vector::zeros(embed_dim));
            embed_mask.push(Vector::ones(embed_dim));
        } else {
            noise.push(gaussian_noise(&Vector::zeros(embed_dim), sigma, reg.noise_scale, rng));
            embed_mask.push(dropout_mask(embed_dim, reg.p_drop_embed, rng));
        }
    }
    RegMasks {
        ids,
        noise,
        embed_mask,
        lstm_out_mask: dropout_mask(2 * hidden, reg.p_drop_lstm_out, rng),
        hidden_mask: dropout_mask(hidden_layer, reg.p_drop_hidden, rng),
    }
}

/// Everything backward needs to replay the forward pass exactly.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub lemma: String,
    /// Token ids actually consumed (post-dropword in train mode).
    pub ids: Vec<usize>,
    pub target: usize,
    pub left_trace: LstmTrace,
    pub right_trace: LstmTrace,
    /// Final hidden states after the LSTM-output dropout mask.
    pub hl_masked: Vector,
    pub hr_masked: Vector,
    pub a: Vector,
    pub a_masked: Vector,
    pub logits: Vector,
    pub y: Vector,
    /// Present iff the pass was a training pass.
    pub masks: Option<RegMasks>,
}

pub enum Mode<'a> {
    Train { reg: &'a RegConfig, sigma: &'a SigmaVector, dropped_id: usize, rng: &'a mut Rng },
    Eval,
}

/// Forward pass. Train mode samples fresh masks; eval mode is a plain pass
/// (inverted dropout needs no eval-time scaling).
pub fn forward(params: &ModelParams, enc: &EncodedInstance, mode: Mode<'_>) -> Result<ForwardTrace> {
    match mode {
        Mode::Eval => forward_with_masks(params, enc, None),
        Mode::Train { reg, sigma, dropped_id, rng } => {
            let masks = sample_masks(
                enc,
                params.embed_dim,
                params.hidden,
                params.hidden_layer,
                reg,
                sigma,
                dropped_id,
                rng,
            );
            forward_with_masks(params, enc, Some(masks))
        }
    }
}

/// Forward pass under explicit masks (`None` = eval). This is the function
/// the finite-difference oracle differentiates: it is deterministic given
/// (params, enc, masks).
pub fn forward_with_masks(
    params: &ModelParams,
    enc: &EncodedInstance,
    masks: Option<RegMasks>,
) -> Result<ForwardTrace> {
    let head = params.head(&enc.lemma)?;
    assert!(enc.target_position < enc.token_ids.len(), "target position out of range");

    let ids: &[usize] = match &masks {
        Some(m) => &m.ids,
        None => &enc.token_ids,
    };
    let target = enc.target_position;

    let input_at = |pos: usize| -> Result<Vector> {
        let e = params.embed(ids[pos])?;
        Ok(match &masks {
            Some(m) => {
                let mut x = e;
                x.add_scaled(1.0, &m.noise[pos]);
                x.hadamard(&m.embed_mask[pos])
            }
            None => e,
        })
    };

    let left_inputs: Vec<Vector> = (0..target).map(input_at).collect::<Result<_>>()?;
    let right_inputs: Vec<Vector> = (target + 1..ids.len()).map(input_at).collect::<Result<_>>()?;

    let left_trace = lstm_run(&params.lstm_left, &left_inputs, Direction::LeftToRight);
    let right_trace = lstm_run(&params.lstm_right, &right_inputs, Direction::RightToLeft);

    let hl = left_trace.final_h();
    let hr = right_trace.final_h();
    let (hl_masked, hr_masked) = match &masks {
        Some(m) => {
            let h = params.hidden;
            let ml = Vector::from(m.lstm_out_mask.data[..h].to_vec());
            let mr = Vector::from(m.lstm_out_mask.data[h..].to_vec());
            (hl.hadamard(&ml), hr.hadamard(&mr))
        }
        None => (hl, hr),
    };

    let a = dense_forward(&params.dense, &hl_masked, &hr_masked);
    let a_masked = match &masks {
        Some(m) => a.hadamard(&m.hidden_mask),
        None => a.clone(),
    };

    let mut logits = head.w.matvec(&a_masked);
    logits.add_scaled(1.0, &head.b);
    let y = softmax(&logits);

    Ok(ForwardTrace {
        lemma: enc.lemma.clone(),
        ids: ids.to_vec(),
        target,
        left_trace,
        right_trace,
        hl_masked,
        hr_masked,
        a,
        a_masked,
        logits,
        y,
        masks,
    })
}

/// Per-instance cross-entropy; the corpus loss is the sum over labeled
/// instances. Returns the loss and whether the log floor clamped.
pub fn loss(trace: &ForwardTrace, gold_sense_index: usize) -> (f64, bool) {
    cross_entropy(&trace.y, gold_sense_index)
}

/// Structural mirror of [`ModelParams`], sparse over embedding columns and
/// softmax heads.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub embedding_cols: BTreeMap<usize, Vector>,
    pub lstm_left: LstmGrads,
    pub lstm_right: LstmGrads,
    pub dense_w: Matrix,
    pub dense_b: Vector,
    pub heads: BTreeMap<String, (Matrix, Vector)>,
}

impl Gradients {
    pub fn zeros(params: &ModelParams) -> Self {
        Gradients {
            embedding_cols: BTreeMap::new(),
            lstm_left: LstmGrads::zeros(params.hidden, params.embed_dim),
            lstm_right: LstmGrads::zeros(params.hidden, params.embed_dim),
            dense_w: Matrix::zeros(params.dense.w.rows, params.dense.w.cols),
            dense_b: Vector::zeros(params.dense.b.len()),
            heads: BTreeMap::new(),
        }
    }

    /// Accumulates `scale · other` into self (mini-batch reduction).
    pub fn add_scaled(&mut self, scale: f64, other: &Gradients) {
        for (&col, g) in &other.embedding_cols {
            self.embedding_cols
                .entry(col)
                .or_insert_with(|| Vector::zeros(g.len()))
                .add_scaled(scale, g);
        }
        self.lstm_left.add_scaled(scale, &other.lstm_left);
        self.lstm_right.add_scaled(scale, &other.lstm_right);
        self.dense_w.add_scaled(scale, &other.dense_w);
        self.dense_b.add_scaled(scale, &other.dense_b);
        for (lemma, (gw, gb)) in &other.heads {
            let entry = self.heads.entry(lemma.clone()).or_insert_with(|| {
                (Matrix::zeros(gw.rows, gw.cols), Vector::zeros(gb.len()))
            });
            entry.0.add_scaled(scale, gw);
            entry.1.add_scaled(scale, gb);
        }
    }

    /// Name of the first tensor containing a non-finite entry, if any.
    pub fn find_non_finite(&self) -> Option<String> {
        for (col, g) in &self.embedding_cols {
            if !g.is_finite() {
                return Some(format!("embeddings[:, {col}]"));
            }
        }
        if !self.lstm_left.is_finite() {
            return Some("lstm_left".into());
        }
        if !self.lstm_right.is_finite() {
            return Some("lstm_right".into());
        }
        if !self.dense_w.is_finite() || !self.dense_b.is_finite() {
            return Some("dense".into());
        }
        for (lemma, (gw, gb)) in &self.heads {
            if !gw.is_finite() || !gb.is_finite() {
                return Some(format!("head.{lemma}"));
            }
        }
        None
    }

    /// Expands to dense tensors matching `params.tensor_names()`, for
    /// comparison against the finite-difference oracle.
    pub fn to_dense(&self, params: &ModelParams) -> BTreeMap<String, Vec<f64>> {
        let mut out = BTreeMap::new();
        let mut emb = vec![0.0; params.embeddings.data.len()];
        for (&col, g) in &self.embedding_cols {
            for i in 0..params.embed_dim {
                emb[i * params.vocab_size() + col] = g[i];
            }
        }
        out.insert("embeddings".to_string(), emb);
        for (side, grads) in [("lstm_left", &self.lstm_left), ("lstm_right", &self.lstm_right)] {
            for (gate, g) in ["input", "forget", "output", "candidate"]
                .iter()
                .zip(grads.gates().into_iter())
            {
                out.insert(format!("{side}.{gate}.w"), g.w.data.clone());
                out.insert(format!("{side}.{gate}.u"), g.u.data.clone());
                out.insert(format!("{side}.{gate}.b"), g.b.data.clone());
            }
        }
        out.insert("dense.w".to_string(), self.dense_w.data.clone());
        out.insert("dense.b".to_string(), self.dense_b.data.clone());
        for (lemma, head) in &params.heads {
            match self.heads.get(lemma) {
                Some((gw, gb)) => {
                    out.insert(format!("head.{lemma}.w"), gw.data.clone());
                    out.insert(format!("head.{lemma}.b"), gb.data.clone());
                }
                None => {
                    out.insert(format!("head.{lemma}.w"), vec![0.0; head.w.data.len()]);
                    out.insert(format!("head.{lemma}.b"), vec![0.0; head.b.len()]);
                }
            }
        }
        out
    }
}

/// Exact gradients of the per-instance loss w.r.t. every parameter touched
/// by this instance, replaying the trace's masks.
pub fn backward(params: &ModelParams, trace: &ForwardTrace, gold_sense_index: usize) -> Result<Gradients> {
    let head = params.head(&trace.lemma)?;
    assert!(gold_sense_index < trace.y.len(), "gold sense index out of range");

    let mut grads = Gradients::zeros(params);

    // softmax + cross-entropy: dlogits = y - t
    let mut dlogits = trace.y.clone();
    dlogits[gold_sense_index] -= 1.0;

    let mut dhead_w = Matrix::zeros(head.w.rows, head.w.cols);
    dhead_w.add_outer(1.0, &dlogits, &trace.a_masked);
    grads.heads.insert(trace.lemma.clone(), (dhead_w, dlogits.clone()));

    let da_masked = head.w.matvec_t(&dlogits);
    let da = match &trace.masks {
        Some(m) => da_masked.hadamard(&m.hidden_mask),
        None => da_masked,
    };

    let (dw, db, dhl_m, dhr_m) = dense_backward(&params.dense, &trace.hl_masked, &trace.hr_masked, &da);
    grads.dense_w = dw;
    grads.dense_b = db;

    let (dhl, dhr) = match &trace.masks {
        Some(m) => {
            let h = params.hidden;
            let ml = Vector::from(m.lstm_out_mask.data[..h].to_vec());
            let mr = Vector::from(m.lstm_out_mask.data[h..].to_vec());
            (dhl_m.hadamard(&ml), dhr_m.hadamard(&mr))
        }
        None => (dhl_m, dhr_m),
    };

    let (lgrads, ldxs) = lstm_backward(&params.lstm_left, &trace.left_trace, &dhl);
    let (rgrads, rdxs) = lstm_backward(&params.lstm_right, &trace.right_trace, &dhr);
    grads.lstm_left = lgrads;
    grads.lstm_right = rgrads;

    let mut accumulate = |pos: usize, dx: &Vector| {
        let de = match &trace.masks {
            Some(m) => dx.hadamard(&m.embed_mask[pos]),
            None => dx.clone(),
        };
        grads
            .embedding_cols
            .entry(trace.ids[pos])
            .or_insert_with(|| Vector::zeros(params.embed_dim))
            .add_scaled(1.0, &de);
    };

    // left trace step t reads position t
    for (t, dx) in ldxs.iter().enumerate() {
        accumulate(t, dx);
    }
    // right trace runs right-to-left: step t reads position len-1-t
    let len = trace.ids.len();
    for (t, dx) in rdxs.iter().enumerate() {
        accumulate(len - 1 - t, dx);
    }

    Ok(grads)
}

/// Eval-mode prediction: argmax over the sense distribution, ties broken to
/// the lowest sense index.
pub fn predict(params: &ModelParams, enc: &EncodedInstance) -> Result<(usize, Vector)> {
    let trace = forward(params, enc, Mode::Eval)?;
    Ok((trace.y.argmax(), trace.y))
}
