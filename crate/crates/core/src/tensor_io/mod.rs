//! Embedding matrices, the EMB1 binary format, token pooling and the
//! labeled QA dataset (JSONL) format.

mod dataset;
mod matrix;
mod pool;

pub use dataset::{split_dataset, Dataset, DatasetMeta, Label, LabeledExample};
pub use matrix::{
    read_matrix, read_matrix_file, write_matrix, write_matrix_file, EmbeddingMatrix, EMB1_MAGIC,
};
pub use pool::{last_token_pool, mean_pool, pool, Pooling, TokenSequenceEmbedding};
