//! LSTM cell, directional unrolling, and the linear hidden layer, with
//! hand-derived backward passes.
//!
//! Cell variant: forget-gate LSTM without peephole connections.
//!   i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
//!   o = σ(W_o x + U_o h + b_o)    g = tanh(W_g x + U_g h + b_g)
//!   c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')

use serde::{Deserialize, Serialize};

use crate::numeric::{sigmoid, Matrix, Rng, Vector};

pub const GATES: [&str; 4] = ["input", "forget", "output", "candidate"];

/// One gate's parameters: input weights, recurrent weights, bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w: Matrix, // hidden x embed
    pub u: Matrix, // hidden x hidden
    pub b: Vector, // hidden
}

impl GateParams {
    fn zeros(hidden: usize, embed: usize) -> Self {
        GateParams {
            w: Matrix::zeros(hidden, embed),
            u: Matrix::zeros(hidden, hidden),
            b: Vector::zeros(hidden),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input: GateParams,
    pub forget: GateParams,
    pub output: GateParams,
    pub candidate: GateParams,
}

impl LstmParams {
    pub fn zeros(hidden: usize, embed: usize) -> Self {
        LstmParams {
            input: GateParams::zeros(hidden, embed),
            forget: GateParams::zeros(hidden, embed),
            output: GateParams::zeros(hidden, embed),
            candidate: GateParams::zeros(hidden, embed),
        }
    }

    /// All weights from U(-0.1, 0.1); forget bias optionally set to 1.0 to
    /// ease early gradient flow (default on, toggleable).
    pub fn init(hidden: usize, embed: usize, rng: &mut Rng, forget_bias_one: bool) -> Self {
        let mut gate = |is_forget: bool| {
            let w = Matrix { rows: hidden, cols: embed, data: rng.uniform_vec(-0.1, 0.1, hidden * embed).data };
            let u = Matrix { rows: hidden, cols: hidden, data: rng.uniform_vec(-0.1, 0.1, hidden * hidden).data };
            let b = if is_forget && forget_bias_one {
                let _ = rng.uniform_vec(-0.1, 0.1, hidden); // keep draw count fixed
                Vector::ones(hidden)
            } else {
                rng.uniform_vec(-0.1, 0.1, hidden)
            };
            GateParams { w, u, b }
        };
        LstmParams {
            input: gate(false),
            forget: gate(true),
            output: gate(false),
            candidate: gate(false),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.input.b.len()
    }

    pub fn embed_size(&self) -> usize {
        self.input.w.cols
    }

    pub fn gates(&self) -> [&GateParams; 4] {
        [&self.input, &self.forget, &self.output, &self.candidate]
    }

    pub fn gates_mut(&mut self) -> [&mut GateParams; 4] {
        [&mut self.input, &mut self.forget, &mut self.output, &mut self.candidate]
    }
}

/// Per-timestep record kept for BPTT.
#[derive(Debug, Clone)]
pub struct LstmStepRecord {
    pub x: Vector,
    pub i: Vector,
    pub f: Vector,
    pub o: Vector,
    pub g: Vector,
    pub c: Vector,
    pub h: Vector,
}

/// Full unrolled trace. Steps are stored in processing order; for a
/// right-to-left run step 0 is the rightmost input.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub hidden: usize,
    pub steps: Vec<LstmStepRecord>,
}

impl LstmTrace {
    pub fn final_h(&self) -> Vector {
        match self.steps.last() {
            Some(s) => s.h.clone(),
            None => Vector::zeros(self.hidden),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

fn gate_preact(g: &GateParams, x: &Vector, h_prev: &Vector) -> Vector {
    let mut z = g.w.matvec(x);
    z.add_scaled(1.0, &g.u.matvec(h_prev));
    z.add_scaled(1.0, &g.b);
    z
}

/// Single LSTM step.
pub fn lstm_step(p: &LstmParams, x: &Vector, h_prev: &Vector, c_prev: &Vector) -> LstmStepRecord {
    assert_eq!(x.len(), p.embed_size(), "lstm_step input size mismatch");
    assert_eq!(h_prev.len(), p.hidden_size(), "lstm_step hidden size mismatch");
    assert_eq!(c_prev.len(), p.hidden_size(), "lstm_step cell size mismatch");

    let i = Vector::from(gate_preact(&p.input, x, h_prev).data.iter().map(|&z| sigmoid(z)).collect::<Vec<_>>());
    let f = Vector::from(gate_preact(&p.forget, x, h_prev).data.iter().map(|&z| sigmoid(z)).collect::<Vec<_>>());
    let o = Vector::from(gate_preact(&p.output, x, h_prev).data.iter().map(|&z| sigmoid(z)).collect::<Vec<_>>());
    let g = Vector::from(gate_preact(&p.candidate, x, h_prev).data.iter().map(|&z| z.tanh()).collect::<Vec<_>>());

    let mut c = f.hadamard(c_prev);
    c.add_scaled(1.0, &i.hadamard(&g));
    let tanh_c = Vector::from(c.data.iter().map(|&v| v.tanh()).collect::<Vec<_>>());
    let h = o.hadamard(&tanh_c);

    LstmStepRecord { x: x.clone(), i, f, o, g, c, h }
}

/// Unrolls the cell over `inputs` in the given direction, starting from
/// h₀ = c₀ = 0. An empty input yields an empty trace whose final state is 0;
/// this happens when the disambiguation target sits at a document edge.
pub fn lstm_run(p: &LstmParams, inputs: &[Vector], direction: Direction) -> LstmTrace {
    let hidden = p.hidden_size();
    let mut h = Vector::zeros(hidden);
    let mut c = Vector::zeros(hidden);
    let mut steps = Vec::with_capacity(inputs.len());

    let iter: Box<dyn Iterator<Item = &Vector>> = match direction {
        Direction::LeftToRight => Box::new(inputs.iter()),
        Direction::RightToLeft => Box::new(inputs.iter().rev()),
    };
    for x in iter {
        let rec = lstm_step(p, x, &h, &c);
        h = rec.h.clone();
        c = rec.c.clone();
        steps.push(rec);
    }
    LstmTrace { hidden, steps }
}

/// Gradients for all LSTM parameters, shape-mirroring [`LstmParams`].
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub input: GateParams,
    pub forget: GateParams,
    pub output: GateParams,
    pub candidate: GateParams,
}

impl LstmGrads {
    pub fn zeros(hidden: usize, embed: usize) -> Self {
        LstmGrads {
            input: GateParams::zeros(hidden, embed),
            forget: GateParams::zeros(hidden, embed),
            output: GateParams::zeros(hidden, embed),
            candidate: GateParams::zeros(hidden, embed),
        }
    }

    pub fn gates(&self) -> [&GateParams; 4] {
        [&self.input, &self.forget, &self.output, &self.candidate]
    }

    pub fn gates_mut(&mut self) -> [&mut GateParams; 4] {
        [&mut self.input, &mut self.forget, &mut self.output, &mut self.candidate]
    }

    pub fn add_scaled(&mut self, scale: f64, other: &LstmGrads) {
        for (a, b) in self.gates_mut().into_iter().zip(other.gates().into_iter()) {
            a.w.add_scaled(scale, &b.w);
            a.u.add_scaled(scale, &b.u);
            a.b.add_scaled(scale, &b.b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.gates_mut() {
            g.w.scale(s);
            g.u.scale(s);
            g.b.scale(s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.gates().iter().all(|g| g.w.is_finite() && g.u.is_finite() && g.b.is_finite())
    }
}

/// BPTT over a full trace. `dh_final` is the loss gradient w.r.t. the final
/// hidden state (the only LSTM output the model consumes). Returns parameter
/// gradients and per-input gradients in *processing order* of the trace.
pub fn lstm_backward(p: &LstmParams, trace: &LstmTrace, dh_final: &Vector) -> (LstmGrads, Vec<Vector>) {
    let hidden = p.hidden_size();
    assert_eq!(trace.hidden, hidden, "trace/params hidden mismatch");
    assert_eq!(dh_final.len(), hidden, "dh_final size mismatch");
    let embed = p.embed_size();

    let mut grads = LstmGrads::zeros(hidden, embed);
    let mut dxs = vec![Vector::zeros(embed); trace.len()];

    let mut dh = dh_final.clone();
    let mut dc = Vector::zeros(hidden);

    for t in (0..trace.len()).rev() {
        let rec = &trace.steps[t];
        assert_eq!(rec.x.len(), embed, "trace/params embed mismatch");
        let (h_prev, c_prev) = if t == 0 {
            (Vector::zeros(hidden), Vector::zeros(hidden))
        } else {
            (trace.steps[t - 1].h.clone(), trace.steps[t - 1].c.clone())
        };

        let tanh_c = Vector::from(rec.c.data.iter().map(|&v| v.tanh()).collect::<Vec<_>>());

        // h = o ⊙ tanh(c)
        let d_o = dh.hadamard(&tanh_c);
        for k in 0..hidden {
            dc[k] += dh[k] * rec.o[k] * (1.0 - tanh_c[k] * tanh_c[k]);
        }

        // c = f ⊙ c_prev + i ⊙ g
        let d_i = dc.hadamard(&rec.g);
        let d_g = dc.hadamard(&rec.i);
        let d_f = dc.hadamard(&c_prev);
        let dc_prev = dc.hadamard(&rec.f);

        // pre-activation gradients
        let dz_i = Vector::from((0..hidden).map(|k| d_i[k] * rec.i[k] * (1.0 - rec.i[k])).collect::<Vec<_>>());
        let dz_f = Vector::from((0..hidden).map(|k| d_f[k] * rec.f[k] * (1.0 - rec.f[k])).collect::<Vec<_>>());
        let dz_o = Vector::from((0..hidden).map(|k| d_o[k] * rec.o[k] * (1.0 - rec.o[k])).collect::<Vec<_>>());
        let dz_g = Vector::from((0..hidden).map(|k| d_g[k] * (1.0 - rec.g[k] * rec.g[k])).collect::<Vec<_>>());

        let mut dx = Vector::zeros(embed);
        let mut dh_prev = Vector::zeros(hidden);
        let gate_params = p.gates();
        let gate_grads = grads.gates_mut();
        for (gi, dz) in [dz_i, dz_f, dz_o, dz_g].into_iter().enumerate() {
            gate_grads[gi].w.add_outer(1.0, &dz, &rec.x);
            gate_grads[gi].u.add_outer(1.0, &dz, &h_prev);
            gate_grads[gi].b.add_scaled(1.0, &dz);
            dx.add_scaled(1.0, &gate_params[gi].w.matvec_t(&dz));
            dh_prev.add_scaled(1.0, &gate_params[gi].u.matvec_t(&dz));
        }
        dxs[t] = dx;
        dh = dh_prev;
        dc = dc_prev;
    }

    (grads, dxs)
}

/// Linear hidden layer: a = W·[hL; hR] + b, no nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub w: Matrix, // |a| x 2*hidden
    pub b: Vector, // |a|
}

impl DenseParams {
    pub fn zeros(out: usize, input: usize) -> Self {
        DenseParams { w: Matrix::zeros(out, input), b: Vector::zeros(out) }
    }

    pub fn init(out: usize, input: usize, rng: &mut Rng) -> Self {
        DenseParams {
            w: Matrix { rows: out, cols: input, data: rng.uniform_vec(-0.1, 0.1, out * input).data },
            b: rng.uniform_vec(-0.1, 0.1, out),
        }
    }
}

pub fn dense_forward(p: &DenseParams, hl: &Vector, hr: &Vector) -> Vector {
    assert_eq!(hl.len() + hr.len(), p.w.cols, "dense_forward input size mismatch");
    let concat = hl.concat(hr);
    let mut a = p.w.matvec(&concat);
    a.add_scaled(1.0, &p.b);
    a
}

/// Gradients of the dense layer; `dhl`/`dhr` split Wᵀ·da at the
/// concatenation boundary.
pub fn dense_backward(
    p: &DenseParams,
    hl: &Vector,
    hr: &Vector,
    da: &Vector,
) -> (Matrix, Vector, Vector, Vector) {
    assert_eq!(da.len(), p.b.len(), "dense_backward output size mismatch");
    let concat = hl.concat(hr);
    let mut dw = Matrix::zeros(p.w.rows, p.w.cols);
    dw.add_outer(1.0, da, &concat);
    let db = da.clone();
    let dconcat = p.w.matvec_t(da);
    let dhl = Vector::from(dconcat.data[..hl.len()].to_vec());
    let dhr = Vector::from(dconcat.data[hl.len()..].to_vec());
    (dw, db, dhl, dhr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;

    fn random_params(hidden: usize, embed: usize, rng: &mut Rng) -> LstmParams {
        LstmParams::init(hidden, embed, rng, false)
    }

    #[test]
    fn zero_params_fixpoint() {
        let p = LstmParams::zeros(3, 2);
        let rec = lstm_step(&p, &Vector::from(vec![1.0, -2.0]), &Vector::zeros(3), &Vector::zeros(3));
        // o = 0.5 but tanh(c) = 0 so h = 0
        assert_eq!(rec.h.data, vec![0.0; 3]);
        assert_eq!(rec.o.data, vec![0.5; 3]);
    }

    #[test]
    fn saturated_forget_gate_copies_state() {
        let mut p = LstmParams::zeros(1, 1);
        p.forget.b = Vector::from(vec![50.0]);
        let rec = lstm_step(&p, &Vector::from(vec![0.0]), &Vector::zeros(1), &Vector::from(vec![1.0]));
        assert!((rec.c[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn step_matches_scalar_reimplementation() {
        let mut rng = Rng::from_seed(21);
        let p = random_params(3, 2, &mut rng);
        let x = rng.uniform_vec(-1.0, 1.0, 2);
        let h_prev = rng.uniform_vec(-0.5, 0.5, 3);
        let c_prev = rng.uniform_vec(-0.5, 0.5, 3);
        let rec = lstm_step(&p, &x, &h_prev, &c_prev);

        // independent scalar loop
        for k in 0..3 {
            let pre = |g: &GateParams| {
                let mut z = g.b[k];
                for j in 0..2 {
                    z += g.w.get(k, j) * x[j];
                }
                for j in 0..3 {
                    z += g.u.get(k, j) * h_prev[j];
                }
                z
            };
            let i = sigmoid(pre(&p.input));
            let f = sigmoid(pre(&p.forget));
            let o = sigmoid(pre(&p.output));
            let g = pre(&p.candidate).tanh();
            let c = f * c_prev[k] + i * g;
            let h = o * c.tanh();
            assert!((rec.c[k] - c).abs() < 1e-12);
            assert!((rec.h[k] - h).abs() < 1e-12);
        }
    }

    #[test]
    fn run_single_element_equals_step() {
        let mut rng = Rng::from_seed(2);
        let p = random_params(4, 3, &mut rng);
        let x = rng.uniform_vec(-1.0, 1.0, 3);
        let trace = lstm_run(&p, &[x.clone()], Direction::LeftToRight);
        let rec = lstm_step(&p, &x, &Vector::zeros(4), &Vector::zeros(4));
        assert_eq!(trace.final_h().data, rec.h.data);
    }

    #[test]
    fn run_chained_matches_manual_steps() {
        let mut rng = Rng::from_seed(8);
        let p = random_params(3, 2, &mut rng);
        let inputs: Vec<Vector> = (0..5).map(|_| rng.uniform_vec(-1.0, 1.0, 2)).collect();
        let trace = lstm_run(&p, &inputs, Direction::LeftToRight);

        let mut h = Vector::zeros(3);
        let mut c = Vector::zeros(3);
        for x in &inputs {
            let rec = lstm_step(&p, x, &h, &c);
            h = rec.h;
            c = rec.c;
        }
        assert_eq!(trace.final_h().data, h.data);
    }

    #[test]
    fn direction_reversal_symmetry() {
        let mut rng = Rng::from_seed(13);
        let p = random_params(3, 2, &mut rng);
        let inputs: Vec<Vector> = (0..4).map(|_| rng.uniform_vec(-1.0, 1.0, 2)).collect();
        let reversed: Vec<Vector> = inputs.iter().rev().cloned().collect();
        let a = lstm_run(&p, &inputs, Direction::RightToLeft);
        let b = lstm_run(&p, &reversed, Direction::LeftToRight);
        assert_eq!(a.final_h().data, b.final_h().data);
        for (ra, rb) in a.steps.iter().zip(b.steps.iter()) {
            assert_eq!(ra.h.data, rb.h.data);
        }
    }

    #[test]
    fn empty_sequence_zero_state() {
        let p = LstmParams::zeros(3, 2);
        let trace = lstm_run(&p, &[], Direction::LeftToRight);
        assert!(trace.is_empty());
        assert_eq!(trace.final_h().data, vec![0.0; 3]);
    }

    #[test]
    fn causality_left_to_right() {
        let mut rng = Rng::from_seed(31);
        let p = random_params(3, 2, &mut rng);
        let inputs: Vec<Vector> = (0..5).map(|_| rng.uniform_vec(-1.0, 1.0, 2)).collect();
        let base = lstm_run(&p, &inputs, Direction::LeftToRight);
        let mut perturbed = inputs.clone();
        perturbed[3][0] += 0.5;
        let after = lstm_run(&p, &perturbed, Direction::LeftToRight);
        for t in 0..3 {
            assert_eq!(base.steps[t].h.data, after.steps[t].h.data);
        }
        assert_ne!(base.steps[3].h.data, after.steps[3].h.data);
    }

    #[test]
    fn state_boundedness() {
        let mut rng = Rng::from_seed(77);
        let p = random_params(4, 3, &mut rng);
        let inputs: Vec<Vector> = (0..10).map(|_| rng.uniform_vec(-5.0, 5.0, 3)).collect();
        let trace = lstm_run(&p, &inputs, Direction::LeftToRight);
        for rec in &trace.steps {
            for k in 0..4 {
                assert!(rec.h[k] > -1.0 && rec.h[k] < 1.0);
                for gate in [&rec.i, &rec.f, &rec.o] {
                    assert!(gate[k] > 0.0 && gate[k] < 1.0);
                }
            }
        }
    }

    #[test]
    fn backward_zero_dh_gives_zero_grads() {
        let mut rng = Rng::from_seed(4);
        let p = random_params(3, 2, &mut rng);
        let inputs: Vec<Vector> = (0..4).map(|_| rng.uniform_vec(-1.0, 1.0, 2)).collect();
        let trace = lstm_run(&p, &inputs, Direction::LeftToRight);
        let (grads, dxs) = lstm_backward(&p, &trace, &Vector::zeros(3));
        for g in grads.gates() {
            assert!(g.w.data.iter().all(|&v| v == 0.0));
            assert!(g.u.data.iter().all(|&v| v == 0.0));
            assert!(g.b.data.iter().all(|&v| v == 0.0));
        }
        for dx in dxs {
            assert!(dx.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_zero_params_output_bias_grad_zero() {
        // with zero params c = 0, tanh(c) = 0, so d b_o = dh ⊙ tanh(c) ⊙ o(1-o) = 0
        let p = LstmParams::zeros(2, 2);
        let trace = lstm_run(&p, &[Vector::from(vec![1.0, 1.0])], Direction::LeftToRight);
        let (grads, _) = lstm_backward(&p, &trace, &Vector::ones(2));
        assert_eq!(grads.output.b.data, vec![0.0, 0.0]);
    }

    /// Finite-difference oracle over a scalar objective dh·h_final.
    fn fd_check(hidden: usize, embed: usize, len: usize, seed: u64) {
        let mut rng = Rng::from_seed(seed);
        let p = random_params(hidden, embed, &mut rng);
        let inputs: Vec<Vector> = (0..len).map(|_| rng.uniform_vec(-1.0, 1.0, embed)).collect();
        let dh = rng.uniform_vec(-1.0, 1.0, hidden);

        let loss = |p: &LstmParams, inputs: &[Vector]| -> f64 {
            lstm_run(p, inputs, Direction::LeftToRight).final_h().dot(&dh)
        };

        let trace = lstm_run(&p, &inputs, Direction::LeftToRight);
        let (grads, dxs) = lstm_backward(&p, &trace, &dh);

        let eps = 1e-5;
        let check = |analytic: f64, plus: f64, minus: f64, what: &str| {
            let numeric = (plus - minus) / (2.0 * eps);
            let denom = analytic.abs().max(numeric.abs());
            if denom < 1e-8 {
                assert!((analytic - numeric).abs() < 1e-8, "{what}: {analytic} vs {numeric}");
            } else {
                assert!(
                    (analytic - numeric).abs() / denom < 1e-6,
                    "{what}: {analytic} vs {numeric}"
                );
            }
        };

        // parameter gradients
        for gi in 0..4 {
            let gp = grads.gates()[gi];
            for (field, len_) in [(0, gp.w.data.len()), (1, gp.u.data.len()), (2, gp.b.len())] {
                for idx in 0..len_ {
                    let mut pp = p.clone();
                    let mut pm = p.clone();
                    {
                        let gm = pp.gates_mut();
                        match field {
                            0 => gm[gi].w.data[idx] += eps,
                            1 => gm[gi].u.data[idx] += eps,
                            _ => gm[gi].b.data[idx] += eps,
                        }
                    }
                    {
                        let gm = pm.gates_mut();
                        match field {
                            0 => gm[gi].w.data[idx] -= eps,
                            1 => gm[gi].u.data[idx] -= eps,
                            _ => gm[gi].b.data[idx] -= eps,
                        }
                    }
                    let analytic = match field {
                        0 => gp.w.data[idx],
                        1 => gp.u.data[idx],
                        _ => gp.b.data[idx],
                    };
                    check(analytic, loss(&pp, &inputs), loss(&pm, &inputs), &format!("gate {gi} field {field} idx {idx}"));
                }
            }
        }

        // input gradients
        for t in 0..len {
            for j in 0..embed {
                let mut ip = inputs.clone();
                let mut im = inputs.clone();
                ip[t][j] += eps;
                im[t][j] -= eps;
                check(dxs[t][j], loss(&p, &ip), loss(&p, &im), &format!("input t={t} j={j}"));
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        fd_check(4, 3, 6, 91);
        fd_check(2, 2, 1, 92);
        fd_check(3, 2, 8, 93);
    }

    #[test]
    fn dense_bias_passthrough_and_composition() {
        let p = DenseParams {
            w: Matrix::zeros(2, 4),
            b: Vector::from(vec![1.0, 2.0]),
        };
        let a = dense_forward(&p, &Vector::from(vec![3.0, 4.0]), &Vector::from(vec![5.0, 6.0]));
        assert_eq!(a.data, vec![1.0, 2.0]);

        let mut rng = Rng::from_seed(6);
        let p = DenseParams::init(3, 4, &mut rng);
        let hl = rng.uniform_vec(-1.0, 1.0, 2);
        let hr = rng.uniform_vec(-1.0, 1.0, 2);
        let a = dense_forward(&p, &hl, &hr);
        let concat = hl.concat(&hr);
        let mut expect = p.w.matvec(&concat);
        expect.add_scaled(1.0, &p.b);
        assert_eq!(a.data, expect.data);
    }

    #[test]
    fn dense_backward_matches_finite_differences() {
        let mut rng = Rng::from_seed(17);
        let p = DenseParams::init(3, 4, &mut rng);
        let hl = rng.uniform_vec(-1.0, 1.0, 2);
        let hr = rng.uniform_vec(-1.0, 1.0, 2);
        let da = rng.uniform_vec(-1.0, 1.0, 3);
        let (dw, db, dhl, dhr) = dense_backward(&p, &hl, &hr, &da);
        assert_eq!(db.data, da.data); // bias gradient identity

        let loss = |p: &DenseParams, hl: &Vector, hr: &Vector| dense_forward(p, hl, hr).dot(&da);
        let eps = 1e-6;
        for idx in 0..dw.data.len() {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp.w.data[idx] += eps;
            pm.w.data[idx] -= eps;
            let numeric = (loss(&pp, &hl, &hr) - loss(&pm, &hl, &hr)) / (2.0 * eps);
            assert!((dw.data[idx] - numeric).abs() < 1e-6);
        }
        for j in 0..2 {
            let mut hp = hl.clone();
            let mut hm = hl.clone();
            hp[j] += eps;
            hm[j] -= eps;
            let numeric = (loss(&p, &hp, &hr) - loss(&p, &hm, &hr)) / (2.0 * eps);
            assert!((dhl[j] - numeric).abs() < 1e-6);

            let mut hp = hr.clone();
            let mut hm = hr.clone();
            hp[j] += eps;
            hm[j] -= eps;
            let numeric = (loss(&p, &hl, &hp) - loss(&p, &hl, &hm)) / (2.0 * eps);
            assert!((dhr[j] - numeric).abs() < 1e-6);
        }
    }

    #[test]
    fn dense_backward_zero_da() {
        let mut rng = Rng::from_seed(18);
        let p = DenseParams::init(3, 4, &mut rng);
        let (dw, db, dhl, dhr) =
            dense_backward(&p, &Vector::ones(2), &Vector::ones(2), &Vector::zeros(3));
        assert!(dw.data.iter().all(|&v| v == 0.0));
        assert!(db.data.iter().all(|&v| v == 0.0));
        assert!(dhl.data.iter().all(|&v| v == 0.0));
        assert!(dhr.data.iter().all(|&v| v == 0.0));
    }
}
