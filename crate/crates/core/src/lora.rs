//! Low-rank adaptation of a dense layer.
//!
//! A frozen weight `W0` (d × k) is adapted by the product of a down
//! projection `A` (r × k) and an up projection `B` (d × r), scaled by
//! `alpha / r`:
//!
//! ```text
//! h = W0 x + (alpha / r) · B (A x)
//! ```
//!
//! A fresh layer has `B = 0`, so it computes exactly `W0 x` until `B` is
//! replaced.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoraError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("rank {rank} must be in 1..={max}")]
    Rank { rank: usize, max: usize },
    #[error("alpha must be positive and finite, got {0}")]
    Alpha(f64),
    #[error("malformed layer file: {0}")]
    Format(String),
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LoraError> {
        if data.len() != rows * cols {
            return Err(LoraError::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Row-major values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LoraError> {
        if x.len() != self.cols {
            return Err(LoraError::Dimension(format!(
                "{}x{} matrix applied to vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(w, v)| w * v).sum())
            .collect())
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, LoraError> {
        if self.cols != rhs.rows {
            return Err(LoraError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for p in 0..self.cols {
                let lhs = self.get(i, p);
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += lhs * rhs.get(p, j);
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix, LoraError> {
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(LoraError::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    /// Standard deviation of the Gaussian used for `A`.
    pub init_std: f64,
    pub seed: u64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig {
            rank: 8,
            alpha: 16.0,
            init_std: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoraLayer {
    w0: Matrix,
    a: Matrix,
    b: Matrix,
    alpha: f64,
}

fn check_alpha(alpha: f64) -> Result<(), LoraError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(LoraError::Alpha(alpha))
    }
}

fn check_rank(rank: usize, d: usize, k: usize) -> Result<(), LoraError> {
    let max = d.min(k);
    if rank == 0 || rank > max {
        return Err(LoraError::Rank { rank, max });
    }
    if 2 * rank > max {
        tracing::warn!(rank, d, k, "adapter rank is not small relative to the layer");
    }
    Ok(())
}

impl LoraLayer {
    /// Fresh adapter around `w0`: Gaussian `A`, zero `B`.
    pub fn new(w0: Matrix, config: LoraConfig) -> Result<Self, LoraError> {
        let (d, k) = (w0.rows, w0.cols);
        check_rank(config.rank, d, k)?;
        check_alpha(config.alpha)?;
        let normal = Normal::new(0.0, config.init_std)
            .map_err(|e| LoraError::Format(format!("init_std: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let a = Matrix::from_fn(config.rank, k, |_, _| normal.sample(&mut rng));
        Ok(LoraLayer {
            w0,
            a,
            b: Matrix::zeros(d, config.rank),
            alpha: config.alpha,
        })
    }

    /// Assemble a layer from explicit matrices, e.g. trained weights.
    pub fn from_parts(w0: Matrix, a: Matrix, b: Matrix, alpha: f64) -> Result<Self, LoraError> {
        let (d, k, r) = (w0.rows, w0.cols, a.rows);
        check_rank(r, d, k)?;
        check_alpha(alpha)?;
        if a.cols != k {
            return Err(LoraError::Dimension(format!("A is {}x{}, expected {r}x{k}", a.rows, a.cols)));
        }
        if (b.rows, b.cols) != (d, r) {
            return Err(LoraError::Dimension(format!("B is {}x{}, expected {d}x{r}", b.rows, b.cols)));
        }
        Ok(LoraLayer { w0, a, b, alpha })
    }

    /// Same frozen weights and `A`, new `B` and `alpha`.
    pub fn with_update(&self, b: Matrix, alpha: f64) -> Result<Self, LoraError> {
        LoraLayer::from_parts(self.w0.clone(), self.a.clone(), b, alpha)
    }

    pub fn d(&self) -> usize {
        self.w0.rows
    }

    pub fn k(&self) -> usize {
        self.w0.cols
    }

    pub fn rank(&self) -> usize {
        self.a.rows
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `alpha / r`.
    pub fn scale(&self) -> f64 {
        self.alpha / self.rank() as f64
    }

    pub fn w0(&self) -> &Matrix {
        &self.w0
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// `r (d + k)`: entries of `A` and `B`.
    pub fn trainable_parameters(&self) -> usize {
        self.rank() * (self.d() + self.k())
    }

    /// `d k`: entries of `W0`.
    pub fn frozen_parameters(&self) -> usize {
        self.d() * self.k()
    }

    /// `W0 x`.
    pub fn forward_base(&self, x: &[f64]) -> Result<Vec<f64>, LoraError> {
        self.w0.matvec(x)
    }

    /// `W0 x + (alpha / r) · B (A x)`.
    pub fn forward_lora(&self, x: &[f64]) -> Result<Vec<f64>, LoraError> {
        let mut h = self.w0.matvec(x)?;
        let down = self.a.matvec(x)?;
        let up = self.b.matvec(&down)?;
        let scale = self.scale();
        for (hi, ui) in h.iter_mut().zip(up) {
            *hi += scale * ui;
        }
        Ok(h)
    }

    /// `(alpha / r) · B A`.
    pub fn delta(&self) -> Matrix {
        self.b
            .matmul(&self.a)
            .expect("B and A shapes agree")
            .scaled(self.scale())
    }

    /// `W0 + (alpha / r) · B A` as a new matrix.
    pub fn merge(&self) -> Matrix {
        self.w0.add(&self.delta()).expect("delta has W0's shape")
    }

    pub fn to_file(&self) -> LayerFile {
        LayerFile {
            d: self.d(),
            k: self.k(),
            r: self.rank(),
            alpha: self.alpha,
            w0: self.w0.data.clone(),
            a: self.a.data.clone(),
            b: self.b.data.clone(),
        }
    }

    pub fn from_file(file: &LayerFile) -> Result<Self, LoraError> {
        let w0 = Matrix::new(file.d, file.k, file.w0.clone())?;
        let a = Matrix::new(file.r, file.k, file.a.clone())?;
        let b = Matrix::new(file.d, file.r, file.b.clone())?;
        LoraLayer::from_parts(w0, a, b, file.alpha)
    }
}

/// Flat serialized layer: dimensions, `alpha`, and row-major matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub d: usize,
    pub k: usize,
    pub r: usize,
    pub alpha: f64,
    pub w0: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LayerFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("layer serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LoraError> {
        serde_json::from_str(text).map_err(|e| LoraError::Format(e.to_string()))
    }
}
