//! Knowledge graph embedding with denoising-mixup negative sampling.
//!
//! Training pairs each positive triple with corrupted triples. After a
//! warm-up, corruptions that score like the positives of their pattern are
//! treated as possible missing facts and mixed with boundary positives under a
//! soft label; the rest are mixed among themselves.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod cli;
pub mod demix;
pub mod error;
pub mod evaluator;
pub mod kg_store;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod scoring;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use kg_store::{Dataset, EntityId, FilterIndex, Pattern, PatternIndex, RelationId, Side, Split, Triple, TripleSet, Vocab};
pub use scalar::Scalar;
pub use scoring::{EmbeddingModel, ModelConfig, ModelKind, Norm};

/// Single-precision model, the default for training.
pub type Model = EmbeddingModel<f32>;
/// Double-precision model, used by gradient checks.
pub type Model64 = EmbeddingModel<f64>;
pub type Sink = scoring::GradSink<f32>;
pub type Sink64 = scoring::GradSink<f64>;
pub type Mixed = demix::MixedTriple<f32>;
pub type Mixed64 = demix::MixedTriple<f64>;
