//! Question embeddings and the sequence / attention encoders.

pub mod attention;
pub mod embedding;
pub mod lstm;

pub use attention::{attention_pool, behavior_attention, pool_or_zero, AttentionNodes, AttentionResult};
pub use embedding::EmbeddingTable;
pub use lstm::{bilstm_encode, bilstm_last, lstm_cell, lstm_run, LstmNodes, LstmParams, LstmState};
