//! Embedding tables, score functions, and their exact gradients.

mod checkpoint;
mod grad;
mod kernels;
mod model;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader, MAGIC,
};
pub use grad::GradSink;
pub use kernels::{ModelKind, Norm, ScoreFn, SlotGrads};
pub use model::{EmbeddingModel, ModelConfig};
