//! Dense linear algebra and activation primitives.
//!
//! Everything on the training path is `f64`; gradient verification against
//! central finite differences needs the precision headroom. Values are plain
//! `Vec<f64>` for vectors and a row-major [`Matrix`] for weights.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// A per-frame signal or bias: plain `f64` storage.
pub type Vector = Vec<f64>;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from row slices; every row must have the same length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `out[i] = Σ_j self[i,j]·x[j]`, accumulated into `out` (not cleared).
    /// Shapes are the caller's responsibility; hot path.
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x.iter()) {
                acc += w * v;
            }
            *o += acc;
        }
    }

    /// `out[j] += Σ_i self[i,j]·y[i]` — transpose product, accumulated.
    pub fn matvec_t_acc(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if *yi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row.iter()) {
                *o += yi * w;
            }
        }
    }

    /// Rank-one update `self += a·bᵀ`; used for weight gradients.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (ai, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if *ai == 0.0 {
                continue;
            }
            for (w, bj) in row.iter_mut().zip(b.iter()) {
                *w += ai * bj;
            }
        }
    }
}

/// `W·x + b` with shape checking.
pub fn affine(w: &Matrix, x: &[f64], b: &[f64]) -> Result<Vector> {
    if w.cols() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "affine: matrix is {}x{} but input has length {}",
            w.rows(),
            w.cols(),
            x.len()
        )));
    }
    if w.rows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "affine: matrix is {}x{} but bias has length {}",
            w.rows(),
            w.cols(),
            b.len()
        )));
    }
    let mut out = b.to_vec();
    w.matvec_acc(x, &mut out);
    debug_assert!(out.iter().all(|v| v.is_finite()));
    Ok(out)
}

/// Elementwise activation kinds used by the recurrent cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Apply `kind` elementwise.
pub fn activate(kind: Activation, x: &[f64]) -> Vector {
    match kind {
        Activation::Sigmoid => x.iter().map(|&v| sigmoid(v)).collect(),
        Activation::Tanh => x.iter().map(|&v| v.tanh()).collect(),
    }
}

/// Numerically stable softmax (max-subtraction before exponentiation).
pub fn softmax(logits: &[f64]) -> Vector {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vector = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    debug_assert!(out.iter().all(|v| v.is_finite()));
    out
}

/// Log of softmax, same stabilization.
pub fn log_softmax(logits: &[f64]) -> Vector {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits
        .iter()
        .map(|&v| (v - max).exp())
        .sum::<f64>()
        .ln();
    logits.iter().map(|&v| v - max - log_sum).collect()
}

/// `ln(e^a + e^b)` without overflow; tolerates `-inf` operands.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Glorot/Xavier uniform initialization: entries i.i.d. on `[-L, L]` with
/// `L = sqrt(6 / (fan_in + fan_out))`. The returned matrix has shape
/// `fan_out × fan_in`. Same seed, same matrix, on every platform.
pub fn xavier_init(fan_in: usize, fan_out: usize, seed: u64) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidInput(
            "xavier_init: fan_in and fan_out must be at least 1".into(),
        ));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut rng = Rng::new(seed);
    let mut m = Matrix::zeros(fan_out, fan_in);
    for v in m.data_mut() {
        *v = rng.uniform(-limit, limit);
    }
    Ok(m)
}
