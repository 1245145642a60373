//! Minimal dense linear algebra and a deterministic, splittable RNG.
//!
//! Everything trains in `f64`; the tight finite-difference tolerances used by
//! the gradient checks depend on it.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::WsdError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copies column `j` into a fresh vector.
    pub fn column(&self, j: usize) -> Vector {
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            out.push(self.get(i, j));
        }
        Vector::from(out)
    }

    pub fn set_column(&mut self, j: usize, v: &Vector) {
        assert_eq!(v.len(), self.rows, "column length mismatch");
        for i in 0..self.rows {
            self.set(i, j, v[i]);
        }
    }

    /// y = M v.
    pub fn matvec(&self, v: &Vector) -> Vector {
        assert_eq!(
            self.cols,
            v.len(),
            "matvec shape mismatch: {}x{} vs len {}",
            self.rows,
            self.cols,
            v.len()
        );
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v.data.iter()) {
                acc += a * b;
            }
            out[i] = acc;
        }
        Vector::from(out)
    }

    /// y = Mᵀ v.
    pub fn matvec_t(&self, v: &Vector) -> Vector {
        assert_eq!(
            self.rows,
            v.len(),
            "matvec_t shape mismatch: {}x{} vs len {}",
            self.rows,
            self.cols,
            v.len()
        );
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let s = v[i];
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += s * a;
            }
        }
        Vector::from(out)
    }

    /// M += a·u·vᵀ (rank-1 update, used for weight gradients).
    pub fn add_outer(&mut self, scale: f64, u: &Vector, v: &Vector) {
        assert_eq!(u.len(), self.rows);
        assert_eq!(v.len(), self.cols);
        for i in 0..self.rows {
            let s = scale * u[i];
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, b) in row.iter_mut().zip(v.data.iter()) {
                *r += s * b;
            }
        }
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    pub data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector { data: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Vector) {
        assert_eq!(self.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len());
        Vector::from(
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a * b)
                .collect::<Vec<_>>(),
        )
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.len(), other.len());
        self.data.iter().zip(other.data.iter()).map(|(a, b)| a * b).sum()
    }

    /// [self; other] concatenation.
    pub fn concat(&self, other: &Vector) -> Vector {
        let mut data = Vec::with_capacity(self.len() + other.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Vector::from(data)
    }

    pub fn ones(len: usize) -> Self {
        Vector { data: vec![1.0; len] }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn argmax(&self) -> usize {
        // ties break to the lowest index
        let mut best = 0;
        for i in 1..self.len() {
            if self.data[i] > self.data[best] {
                best = i;
            }
        }
        best
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector { data }
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Numerically stable softmax (max-subtraction).
pub fn softmax(v: &Vector) -> Vector {
    assert!(!v.is_empty(), "softmax of empty vector");
    let max = v.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.data.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for x in &mut out {
        *x /= sum;
    }
    Vector::from(out)
}

/// Floor applied to predicted probabilities inside the log; keeps early
/// training from producing NaN losses.
pub const LOG_FLOOR: f64 = 1e-12;

/// −log(pred[target]). Probabilities at or below zero are clamped to
/// [`LOG_FLOOR`] and counted via the returned flag.
pub fn cross_entropy(pred: &Vector, target_index: usize) -> (f64, bool) {
    assert!(target_index < pred.len(), "cross_entropy index out of range");
    let p = pred[target_index];
    if p <= 0.0 {
        (-LOG_FLOOR.ln(), true)
    } else {
        (-p.ln(), false)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Derivative kinds take the activation *output* as input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Tanh,
    Sigmoid,
    TanhPrime,
    SigmoidPrime,
}

pub fn elementwise(kind: Elementwise, v: &Vector) -> Vector {
    let f = match kind {
        Elementwise::Tanh => |x: f64| x.tanh(),
        Elementwise::Sigmoid => sigmoid,
        Elementwise::TanhPrime => |y: f64| 1.0 - y * y,
        Elementwise::SigmoidPrime => |y: f64| y * (1.0 - y),
    };
    Vector::from(v.data.iter().map(|&x| f(x)).collect::<Vec<_>>())
}

/// Deterministic seedable RNG handle.
///
/// Built on ChaCha8 with an explicit stream id, so independent consumers take
/// `split` handles and reordering unrelated code does not perturb each
/// other's draws.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        Rng { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream derived from the same seed.
    pub fn split(&self, stream: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream);
        Rng { seed: self.seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        assert!(lo < hi, "uniform requires lo < hi");
        Uniform::new(lo, hi).sample(&mut self.inner)
    }

    pub fn gaussian(&mut self, mean: f64, std: f64) -> f64 {
        assert!(std >= 0.0, "gaussian requires std >= 0");
        if std == 0.0 {
            return mean;
        }
        Normal::new(mean, std).unwrap().sample(&mut self.inner)
    }

    pub fn uniform_vec(&mut self, lo: f64, hi: f64, n: usize) -> Vector {
        Vector::from((0..n).map(|_| self.uniform(lo, hi)).collect::<Vec<_>>())
    }

    pub fn gaussian_vec(&mut self, mean: f64, std: f64, n: usize) -> Vector {
        Vector::from((0..n).map(|_| self.gaussian(mean, std)).collect::<Vec<_>>())
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.gen::<f64>() < p
    }

    pub fn gen_range(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.inner.gen_range(0..=i);
            xs.swap(i, j);
        }
    }
}

/// Shape check used by deserialization and checkpoint loads.
pub fn check_shape(name: &str, m: &Matrix, rows: usize, cols: usize) -> Result<(), WsdError> {
    if m.rows != rows || m.cols != cols || m.data.len() != m.rows * m.cols {
        return Err(WsdError::Shape {
            tensor: name.to_string(),
            expected: format!("{rows}x{cols}"),
            actual: format!("{}x{} (len {})", m.rows, m.cols, m.data.len()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_identity_and_projection() {
        let id = Matrix::identity(3);
        let v = Vector::from(vec![1.0, 2.0, 3.0]);
        assert_eq!(id.matvec(&v).data, vec![1.0, 2.0, 3.0]);

        let p = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(p.matvec(&Vector::from(vec![5.0, 7.0])).data, vec![5.0, 0.0]);
    }

    #[test]
    fn matvec_matches_triple_loop() {
        let mut rng = Rng::from_seed(3);
        let m = Matrix {
            rows: 4,
            cols: 3,
            data: rng.uniform_vec(-1.0, 1.0, 12).data,
        };
        let v = rng.uniform_vec(-1.0, 1.0, 3);
        let got = m.matvec(&v);
        for i in 0..4 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += m.get(i, j) * v[j];
            }
            assert_eq!(got[i], acc);
        }
    }

    #[test]
    #[should_panic(expected = "matvec shape mismatch")]
    fn matvec_shape_mismatch_panics() {
        let m = Matrix::zeros(2, 3);
        m.matvec(&Vector::zeros(2));
    }

    #[test]
    fn softmax_basics() {
        let s = softmax(&Vector::from(vec![0.0, 0.0]));
        assert!((s[0] - 0.5).abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15);

        // max-shift keeps large logits finite
        let s = softmax(&Vector::from(vec![1000.0, 0.0]));
        assert!(s.is_finite());
        assert!(s[0] > 0.999999 && s[1] < 1e-6);

        // frozen values computed independently from exp/Σexp
        let s = softmax(&Vector::from(vec![1.0, 2.0, 3.0]));
        assert!((s[0] - 0.09003057317038046).abs() < 1e-5);
        assert!((s[1] - 0.24472847105479767).abs() < 1e-5);
        assert!((s[2] - 0.6652409557748219).abs() < 1e-5);
        let sum: f64 = s.data.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut rng = Rng::from_seed(11);
        for _ in 0..50 {
            let v = rng.uniform_vec(-5.0, 5.0, 6);
            let mut shifted = v.clone();
            let c = rng.uniform(-100.0, 100.0);
            for x in &mut shifted.data {
                *x += c;
            }
            let a = softmax(&v);
            let b = softmax(&shifted);
            for i in 0..6 {
                assert!((a[i] - b[i]).abs() < 1e-12);
            }
            assert_eq!(a.argmax(), v.argmax());
        }
    }

    #[test]
    fn cross_entropy_values() {
        let (l, _) = cross_entropy(&Vector::from(vec![1.0, 0.0]), 0);
        assert_eq!(l, 0.0);
        let (l, _) = cross_entropy(&Vector::from(vec![0.5, 0.5]), 1);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let (l, _) = cross_entropy(&Vector::from(vec![0.1, 0.2, 0.7]), 0);
        assert!((l - 2.302585092994046).abs() < 1e-9);
        // zero probability clamps and flags
        let (l, clamped) = cross_entropy(&Vector::from(vec![0.0, 1.0]), 0);
        assert!(clamped);
        assert!(l.is_finite());
    }

    #[test]
    fn elementwise_values() {
        let s = elementwise(Elementwise::Sigmoid, &Vector::from(vec![0.0]));
        assert_eq!(s[0], 0.5);
        let t = elementwise(Elementwise::Tanh, &Vector::from(vec![0.0]));
        assert_eq!(t[0], 0.0);
        let sp = elementwise(Elementwise::SigmoidPrime, &Vector::from(vec![0.5]));
        assert_eq!(sp[0], 0.25);
        let tp = elementwise(Elementwise::TanhPrime, &Vector::from(vec![0.5]));
        assert_eq!(tp[0], 0.75);
    }

    #[test]
    fn rng_determinism() {
        let mut a = Rng::from_seed(42);
        let mut b = Rng::from_seed(42);
        assert_eq!(a.uniform_vec(-1.0, 1.0, 100).data, b.uniform_vec(-1.0, 1.0, 100).data);
        assert_eq!(a.gaussian_vec(0.0, 1.0, 100).data, b.gaussian_vec(0.0, 1.0, 100).data);
    }

    #[test]
    fn rng_split_streams_independent_of_order() {
        let root = Rng::from_seed(7);
        let mut s1 = root.split(1);
        let draws_before = s1.uniform_vec(-1.0, 1.0, 10);

        let root2 = Rng::from_seed(7);
        let mut other = root2.split(2);
        let _ = other.uniform_vec(-1.0, 1.0, 999); // unrelated consumption
        let mut s1_again = root2.split(1);
        let draws_after = s1_again.uniform_vec(-1.0, 1.0, 10);
        assert_eq!(draws_before.data, draws_after.data);
    }

    #[test]
    fn gaussian_zero_std_is_constant() {
        let mut rng = Rng::from_seed(1);
        assert_eq!(rng.gaussian_vec(0.0, 0.0, 3).data, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_large_sample_mean() {
        let mut rng = Rng::from_seed(5);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += rng.uniform(-0.1, 0.1);
        }
        let mean = sum / n as f64;
        assert!(mean.abs() < 0.001, "mean {mean} out of bounds");
    }

    proptest::proptest! {
        #[test]
        fn softmax_is_a_distribution(v in proptest::collection::vec(-50.0f64..50.0, 1..12)) {
            let y = softmax(&Vector::from(v));
            let sum: f64 = y.data.iter().sum();
            proptest::prop_assert!((sum - 1.0).abs() < 1e-12);
            proptest::prop_assert!(y.data.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }

        #[test]
        fn softmax_shift_invariant(v in proptest::collection::vec(-50.0f64..50.0, 1..12), c in -100.0f64..100.0) {
            let a = softmax(&Vector::from(v.clone()));
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let b = softmax(&Vector::from(shifted));
            for (x, y) in a.data.iter().zip(b.data.iter()) {
                proptest::prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matvec_distributivity() {
        let mut rng = Rng::from_seed(9);
        for _ in 0..20 {
            let m = Matrix { rows: 5, cols: 4, data: rng.uniform_vec(-2.0, 2.0, 20).data };
            let u = rng.uniform_vec(-2.0, 2.0, 4);
            let v = rng.uniform_vec(-2.0, 2.0, 4);
            let mut sum = u.clone();
            sum.add_scaled(1.0, &v);
            let lhs = m.matvec(&sum);
            let mut rhs = m.matvec(&u);
            rhs.add_scaled(1.0, &m.matvec(&v));
            for i in 0..5 {
                let denom = rhs[i].abs().max(1.0);
                assert!((lhs[i] - rhs[i]).abs() / denom < 1e-9);
            }
        }
    }
}
