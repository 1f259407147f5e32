//! Class-conditional Gaussian models fitted from a centered truncated SVD,
//! and the Mahalanobis distance they induce.
//!
//! For a centered N×d matrix Z = U Σ Vᵀ the sample covariance is
//! (1/N) ZᵀZ = V (ΣᵀΣ / N) Vᵀ, so the top-k right singular vectors and the
//! eigenvalues λ_j = σ_j² / N give the leading part of the covariance
//! without ever forming the d×d matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_io::EmbeddingMatrix;

/// Absolute lower bound on the variance floor.
pub const MIN_EPSILON: f64 = 1e-12;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_EPSILON_REL: f64 = 1e-6;

/// Treatment of the component of `z - μ` that lies outside the retained basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualMode {
    /// Distance is measured inside the rank-k subspace only.
    #[default]
    Ignore,
    /// The residual is charged at the floor variance ε.
    Floor,
}

impl fmt::Display for ResidualMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResidualMode::Ignore => "ignore",
            ResidualMode::Floor => "floor",
        })
    }
}

impl FromStr for ResidualMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ignore" => Ok(ResidualMode::Ignore),
            "floor" => Ok(ResidualMode::Floor),
            other => Err(Error::Parameter(format!(
                "unknown residual mode {other:?} (expected ignore or floor)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MahalanobisConfig {
    pub k: usize,
    /// ε = max(epsilon_rel · λ_1, 1e-12)
    pub epsilon_rel: f64,
    pub residual_mode: ResidualMode,
}

impl Default for MahalanobisConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            epsilon_rel: DEFAULT_EPSILON_REL,
            residual_mode: ResidualMode::Ignore,
        }
    }
}

impl MahalanobisConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if !(self.epsilon_rel > 0.0 && self.epsilon_rel.is_finite()) {
            return Err(Error::Parameter(format!(
                "epsilon_rel must be positive and finite, got {}",
                self.epsilon_rel
            )));
        }
        Ok(())
    }
}

/// Gaussian fitted to one class of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    mean: Vec<f64>,
    /// k columns of length d, column-major.
    basis: Vec<f64>,
    eigenvalues: Vec<f64>,
    sample_count: usize,
    epsilon: f64,
    residual_mode: ResidualMode,
}

impl GaussianModel {
    /// Assembles a model from parts, checking shapes and orthonormality.
    pub fn from_parts(
        mean: Vec<f64>,
        basis_columns: Vec<Vec<f64>>,
        eigenvalues: Vec<f64>,
        sample_count: usize,
        epsilon: f64,
        residual_mode: ResidualMode,
    ) -> Result<Self> {
        let d = mean.len();
        let k = basis_columns.len();
        if d == 0 {
            return Err(Error::Shape("model dimension must be positive".into()));
        }
        if k == 0 || k > d {
            return Err(Error::Shape(format!("retained rank {k} invalid for d={d}")));
        }
        if eigenvalues.len() != k {
            return Err(Error::Shape(format!(
                "{} eigenvalues for {k} basis columns",
                eigenvalues.len()
            )));
        }
        if let Some(col) = basis_columns.iter().find(|c| c.len() != d) {
            return Err(Error::Shape(format!(
                "basis column of length {} for d={d}",
                col.len()
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Parameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let finite = mean
            .iter()
            .chain(basis_columns.iter().flatten())
            .chain(&eigenvalues)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Parameter("model contains non-finite values".into()));
        }
        if eigenvalues.iter().any(|&l| l < 0.0) || eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Parameter(
                "eigenvalues must be non-negative and non-increasing".into(),
            ));
        }
        for i in 0..k {
            for j in 0..=i {
                let dot: f64 = basis_columns[i]
                    .iter()
                    .zip(&basis_columns[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot - target).abs() > 1e-8 {
                    return Err(Error::Parameter(format!(
                        "basis columns {i},{j} are not orthonormal (dot = {dot})"
                    )));
                }
            }
        }
        Ok(Self {
            mean,
            basis: basis_columns.into_iter().flatten().collect(),
            eigenvalues,
            sample_count,
            epsilon,
            residual_mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis_column(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.basis[j * d..(j + 1) * d]
    }

    pub fn basis_columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.basis.chunks_exact(self.dim())
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn residual_mode(&self) -> ResidualMode {
        self.residual_mode
    }

    /// Mahalanobis distance of `z` measured in the retained eigenbasis,
    /// with per-direction variance λ_j + ε.
    pub fn mahalanobis(&self, z: &[f64]) -> Result<f64> {
        let d = self.dim();
        if z.len() != d {
            return Err(Error::Shape(format!(
                "probe has length {}, model expects {d}",
                z.len()
            )));
        }
        if let Some(col) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col });
        }
        let diff: Vec<f64> = z.iter().zip(&self.mean).map(|(a, m)| a - m).collect();

        let mut sq = 0.0;
        let mut residual = match self.residual_mode {
            ResidualMode::Floor => Some(diff.clone()),
            ResidualMode::Ignore => None,
        };
        for (j, col) in self.basis_columns().enumerate() {
            let c: f64 = col.iter().zip(&diff).map(|(b, x)| b * x).sum();
            sq += c * c / (self.eigenvalues[j] + self.epsilon);
            if let Some(r) = residual.as_mut() {
                for (ri, bi) in r.iter_mut().zip(col) {
                    *ri -= c * bi;
                }
            }
        }
        if let Some(r) = residual {
            sq += r.iter().map(|v| v * v).sum::<f64>() / self.epsilon;
        }
        Ok(sq.sqrt())
    }

    pub fn mahalanobis_f32(&self, z: &[f32]) -> Result<f64> {
        let z: Vec<f64> = z.iter().map(|&v| f64::from(v)).collect();
        self.mahalanobis(&z)
    }

    /// basis · diag(λ) · basisᵀ as a dense d×d matrix.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut c = DMatrix::zeros(d, d);
        for (col, &lambda) in self.basis_columns().zip(&self.eigenvalues) {
            let v = DVector::from_column_slice(col);
            c += lambda * &v * v.transpose();
        }
        c
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ModelWire::from(self)).expect("model serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let wire: ModelWire =
            serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
        wire.try_into()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&ModelWire::from(self)).expect("model serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let wire: ModelWire = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        wire.try_into()
    }
}

/// Subtracts the column mean from every row (in f64).
pub fn center(m: &EmbeddingMatrix) -> Result<(DMatrix<f64>, Vec<f64>)> {
    center_matrix(m.to_dmatrix())
}

pub fn center_matrix(mut z: DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = z.nrows();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let mut mean = vec![0.0; z.ncols()];
    for (j, mut col) in z.column_iter_mut().enumerate() {
        let mut sum = 0.0;
        for v in col.iter() {
            sum += *v;
        }
        let mu = sum / n as f64;
        mean[j] = mu;
        col.add_scalar_mut(-mu);
    }
    Ok((z, mean))
}

pub fn fit_gaussian(m: &EmbeddingMatrix, cfg: &MahalanobisConfig) -> Result<GaussianModel> {
    fit_gaussian_matrix(m.to_dmatrix(), cfg)
}

/// Fits a model from f64 rows (N×d).
///
/// The retained rank is `min(cfg.k, N - 1, d)`; centering removes one
/// degree of freedom, so at most N-1 directions carry variance.
pub fn fit_gaussian_matrix(z: DMatrix<f64>, cfg: &MahalanobisConfig) -> Result<GaussianModel> {
    cfg.validate()?;
    let n = z.nrows();
    let d = z.ncols();
    if let Some(pos) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos % n.max(1),
            col: pos / n.max(1),
        });
    }
    let (centered, mean) = center_matrix(z)?;
    let k = cfg.k.min(n - 1).min(d);

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sigma = svd.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let mut columns = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut col: Vec<f64> = v_t.row(idx).iter().copied().collect();
        orient(&mut col);
        columns.push(col);
        eigenvalues.push(sigma[idx] * sigma[idx] / n as f64);
    }

    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0);
    let epsilon = (cfg.epsilon_rel * lambda_max).max(MIN_EPSILON);
    GaussianModel::from_parts(mean, columns, eigenvalues, n, epsilon, cfg.residual_mode)
}

/// Flips `col` so its largest-magnitude entry (first on ties) is non-negative.
fn orient(col: &mut [f64]) {
    let mut best = 0;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        for v in col.iter_mut() {
            *v = -*v;
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelWire {
    format: String,
    d: usize,
    k: usize,
    n: usize,
    epsilon: f64,
    mean: Vec<f64>,
    eigenvalues: Vec<f64>,
    basis: Vec<Vec<f64>>,
    #[serde(default)]
    residual_mode: ResidualMode,
}

pub const MODEL_FORMAT: &str = "CMG1";

impl From<&GaussianModel> for ModelWire {
    fn from(g: &GaussianModel) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            d: g.dim(),
            k: g.k(),
            n: g.sample_count,
            epsilon: g.epsilon,
            mean: g.mean.clone(),
            eigenvalues: g.eigenvalues.clone(),
            basis: g.basis_columns().map(<[f64]>::to_vec).collect(),
            residual_mode: g.residual_mode,
        }
    }
}

impl TryFrom<ModelWire> for GaussianModel {
    type Error = Error;

    fn try_from(w: ModelWire) -> Result<Self> {
        if w.format != MODEL_FORMAT {
            return Err(Error::Format(format!(
                "model format tag {:?}, expected {MODEL_FORMAT:?}",
                w.format
            )));
        }
        if w.mean.len() != w.d || w.basis.len() != w.k {
            return Err(Error::Shape(format!(
                "declared d={} k={} but mean has {} entries and basis {} columns",
                w.d,
                w.k,
                w.mean.len(),
                w.basis.len()
            )));
        }
        GaussianModel::from_parts(
            w.mean,
            w.basis,
            w.eigenvalues,
            w.n,
            w.epsilon,
            w.residual_mode,
        )
    }
}
