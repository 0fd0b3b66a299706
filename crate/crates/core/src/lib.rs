//! Conversational emotion recognition with large language models.
//!
//! The pipeline classifies utterances into four emotions (happy, sad,
//! neutral, angry) by prompting a chat model in one of four ways:
//!
//! * zero-shot, with the target utterance alone;
//! * zero-shot with the `k` preceding turns of the conversation;
//! * in-context learning with one randomly drawn reference example per emotion;
//! * augmented example retrieval (AER): the reference example most
//!   cosine-similar to the target is shown alongside three random examples
//!   of the other emotions, over five rounds that swap in the retrieved
//!   example's original text and four paraphrases; the rounds are then
//!   majority-voted.
//!
//! Results are scored with macro F1 over the four emotions.
//!
//! Embedding and metric code is generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below fix the precisions the engine uses.

pub mod cache;
pub mod corpus;
pub mod embedding;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod hashing;
pub mod llm;
pub mod prompting;
pub mod reference;
pub mod retry;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Stored embedding (single precision, `f64` accumulation).
pub type EmbeddingVector = embedding::Embedding<f32>;
/// Double-precision embedding.
pub type EmbeddingVector64 = embedding::Embedding<f64>;
pub type EmbeddingIndex = embedding::EmbeddingIndex<f32>;
pub type ReferenceExample = reference::ReferenceExample<f32>;
pub type ReferenceStore = reference::ReferenceStore<f32>;
pub type ClassMetrics = evaluation::ClassMetrics<f64>;
