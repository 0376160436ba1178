//! Multi-behavior question recommendation for community Q&A platforms.
//!
//! A user's answer history is encoded with recurrent networks while the far
//! more plentiful follow and vote events are pooled through dot-product
//! attention against the question being scored. The full model fuses the three
//! behaviors at every answering step, then pulls in the representations of the
//! most similar users and regularizes the user towards that group.
//!
//! Layout:
//!
//! * [`numcore`]: dense tensors, a reverse-mode tape, Adam, finite differences.
//! * [`corpus`]: behavior logs, timelines, leave-one-out splits, negative
//!   sampling and the synthetic planted-topic generator.
//! * [`encoders`]: embedding table, LSTM / Bi-LSTM, attention pooling.
//! * [`model`]: every model variant, losses, training and checkpoints.
//! * [`eval`]: candidate ranking, HR@K / NDCG@K and report emission.

pub mod config;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod model;
pub mod numcore;
pub mod par;

pub use config::RunConfig;
pub use error::{Error, Result};
