//! Vision-language interaction at desk scale.
//!
//! The screen features `S` (`m x d_s`, one row per visual token; `m = 1` for
//! a pooled screenshot embedding) are projected to the language width,
//! attended by the language features `L` (`n x d_l`), and fused with a
//! sigmoid gate:
//!
//! ```text
//! K = V = S W^T                          (m x d_l)
//! H     = softmax(L K^T / sqrt(d_l)) V   (n x d_l)
//! g     = sigmoid(L W_l + H W_v)         (n x d_l)
//! F     = (1 - g) * L + g * H
//! ```
//!
//! Everything is `f64`. [`grad_check`] compares analytic Jacobian-vector
//! products of these maps with central finite differences.

mod grad;
mod matrix;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grad::{grad_check, GradTarget};
pub use matrix::Matrix;

pub const DEFAULT_SCREEN_DIM: usize = 32;
pub const DEFAULT_LANGUAGE_DIM: usize = 16;
pub const MAX_LANGUAGE_TOKENS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("tensor contains NaN or infinite values")]
    NonFinite,
    #[error("finite-difference step {0} must lie in [1e-7, 1e-3]")]
    InvalidStep(f64),
}

/// Screen and language features for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub screen: Matrix,
    pub language: Matrix,
}

impl FeatureBundle {
    pub fn new(screen: Matrix, language: Matrix) -> Self {
        FeatureBundle { screen, language }
    }

    /// Entries uniform in `[-1, 1]`.
    pub fn random(
        rng: &mut impl Rng,
        screen_tokens: usize,
        language_tokens: usize,
        screen_dim: usize,
        language_dim: usize,
    ) -> Self {
        FeatureBundle {
            screen: random_matrix(rng, screen_tokens, screen_dim, 1.0),
            language: random_matrix(rng, language_tokens, language_dim, 1.0),
        }
    }

    pub fn screen_dim(&self) -> usize {
        self.screen.cols()
    }

    pub fn language_dim(&self) -> usize {
        self.language.cols()
    }
}

/// Projection and gate weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    /// `d_l x d_s`.
    pub projection: Matrix,
    /// `d_l x d_l`, applied to the language features.
    pub gate_language: Matrix,
    /// `d_l x d_l`, applied to the attended vision features.
    pub gate_vision: Matrix,
}

impl FusionParams {
    /// Uniform entries scaled by `scale / sqrt(fan_in)`.
    pub fn random(rng: &mut impl Rng, screen_dim: usize, language_dim: usize, scale: f64) -> Self {
        let s_proj = scale / (screen_dim as f64).sqrt();
        let s_gate = scale / (language_dim as f64).sqrt();
        FusionParams {
            projection: random_matrix(rng, language_dim, screen_dim, s_proj),
            gate_language: random_matrix(rng, language_dim, language_dim, s_gate),
            gate_vision: random_matrix(rng, language_dim, language_dim, s_gate),
        }
    }

    /// Attention scale dimension (the language width).
    pub fn key_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn check(&self, b: &FeatureBundle) -> Result<(), FusionError> {
        let d_l = b.language_dim();
        let d_s = b.screen_dim();
        if self.projection.shape() != (d_l, d_s) {
            return Err(FusionError::Dimension(format!(
                "projection is {:?}, expected ({d_l}, {d_s})",
                self.projection.shape()
            )));
        }
        for (name, m) in [
            ("gate_language", &self.gate_language),
            ("gate_vision", &self.gate_vision),
        ] {
            if m.shape() != (d_l, d_l) {
                return Err(FusionError::Dimension(format!(
                    "{name} is {:?}, expected ({d_l}, {d_l})",
                    m.shape()
                )));
            }
        }
        Ok(())
    }
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0) * scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    /// `n x m`, each row a probability vector over the keys.
    pub weights: Matrix,
    /// `n x d_l`.
    pub output: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gated {
    /// Elementwise gate values.
    pub gate: Matrix,
    pub fused: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub projected: Matrix,
    pub attention: Attention,
    pub gated: Gated,
}

/// `S W^T`: screen features at the language width.
pub fn project(screen: &Matrix, projection: &Matrix) -> Result<Matrix, FusionError> {
    screen.matmul_t(projection)
}

/// Scaled dot-product attention with explicit query, key and value.
pub fn attention(query: &Matrix, key: &Matrix, value: &Matrix) -> Result<Attention, FusionError> {
    if key.rows() != value.rows() {
        return Err(FusionError::Dimension(format!(
            "{} keys but {} values",
            key.rows(),
            value.rows()
        )));
    }
    let scale = 1.0 / (query.cols() as f64).sqrt();
    let weights = query.matmul_t(key)?.scale(scale).softmax_rows();
    let output = weights.matmul(value)?;
    Ok(Attention { weights, output })
}

/// Language features attend over the projected screen features.
pub fn attend(b: &FeatureBundle, p: &FusionParams) -> Result<Attention, FusionError> {
    p.check(b)?;
    let projected = project(&b.screen, &p.projection)?;
    attention(&b.language, &projected, &projected)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Gated fusion of language features and attended vision features.
pub fn gate_fuse(
    language: &Matrix,
    attended: &Matrix,
    p: &FusionParams,
) -> Result<Gated, FusionError> {
    if language.shape() != attended.shape() {
        return Err(FusionError::Dimension(format!(
            "language {:?} and attended {:?} differ",
            language.shape(),
            attended.shape()
        )));
    }
    let logits = language
        .matmul(&p.gate_language)?
        .add(&attended.matmul(&p.gate_vision)?)?;
    let gate = logits.map(sigmoid);
    let mut fused = Matrix::zeros(language.rows(), language.cols());
    for i in 0..language.rows() {
        for j in 0..language.cols() {
            let (l, h, g) = (language.get(i, j), attended.get(i, j), gate.get(i, j));
            // Clamp away the last-ulp drift so the result stays in the hull.
            let v = ((1.0 - g) * l + g * h).clamp(l.min(h), l.max(h));
            fused.set(i, j, v);
        }
    }
    Ok(Gated { gate, fused })
}

/// Projection, attention and gated fusion in one pass.
pub fn forward(b: &FeatureBundle, p: &FusionParams) -> Result<FusionOutput, FusionError> {
    p.check(b)?;
    let projected = project(&b.screen, &p.projection)?;
    let attention = attention(&b.language, &projected, &projected)?;
    let gated = gate_fuse(&b.language, &attention.output, p)?;
    Ok(FusionOutput {
        projected,
        attention,
        gated,
    })
}
