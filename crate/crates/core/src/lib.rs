//! Hallucination detection over LLM hidden-state embeddings.
//!
//! The crate covers the whole pipeline: prompt-guided generation of paired
//! truthful/hallucinated QA data through an OpenAI-compatible chat endpoint,
//! Gaussian modeling of pooled hidden-state embeddings via a centered
//! truncated SVD, the contrastive Mahalanobis score, and the evaluation
//! harnesses (AUROC, ROC, sweeps, transfer grids) used to measure it.

pub mod augment;
pub mod detector;
pub mod error;
pub mod eval;
pub mod gaussian;
pub mod llm;
pub mod synth;
pub mod tensor_io;

pub use detector::{CmDetector, CmScore, ScoredExample, Verdict};
pub use error::{Error, Result};
pub use gaussian::{GaussianModel, MahalanobisConfig, ResidualMode};
pub use tensor_io::{Dataset, DatasetMeta, EmbeddingMatrix, Label, LabeledExample, Pooling};

pub use nalgebra;
