use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-token hidden states of one sequence at a single layer, T×d row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequenceEmbedding {
    tokens: usize,
    dim: usize,
    data: Vec<f32>,
}

impl TokenSequenceEmbedding {
    /// A sequence with zero tokens is representable; pooling it fails.
    pub fn new(tokens: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("token dimension must be positive".into()));
        }
        if tokens.checked_mul(dim) != Some(data.len()) {
            return Err(Error::Shape(format!(
                "{tokens}x{dim} sequence needs {} values, got {}",
                tokens.saturating_mul(dim),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { tokens, dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.as_ref().len() != dim {
                return Err(Error::Shape("ragged token rows".into()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn token(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Token-to-sentence reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    Mean,
    #[default]
    LastToken,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Mean => "mean",
            Pooling::LastToken => "last-token",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "last-token" => Ok(Pooling::LastToken),
            other => Err(Error::Parameter(format!(
                "unknown pooling mode {other:?} (expected mean or last-token)"
            ))),
        }
    }
}

/// Column mean over tokens. Each column is accumulated in f64 over token
/// index 0..T-1, divided by T, then narrowed to f32.
pub fn mean_pool(seq: &TokenSequenceEmbedding) -> Result<Vec<f32>> {
    if seq.tokens == 0 {
        return Err(Error::EmptySequence);
    }
    let mut acc = vec![0.0f64; seq.dim];
    for t in 0..seq.tokens {
        for (a, &v) in acc.iter_mut().zip(seq.token(t)) {
            *a += f64::from(v);
        }
    }
    let n = seq.tokens as f64;
    Ok(acc.into_iter().map(|a| (a / n) as f32).collect())
}

pub fn last_token_pool(seq: &TokenSequenceEmbedding) -> Result<Vec<f32>> {
    if seq.tokens == 0 {
        return Err(Error::EmptySequence);
    }
    Ok(seq.token(seq.tokens - 1).to_vec())
}

pub fn pool(seq: &TokenSequenceEmbedding, mode: Pooling) -> Result<Vec<f32>> {
    match mode {
        Pooling::Mean => mean_pool(seq),
        Pooling::LastToken => last_token_pool(seq),
    }
}
