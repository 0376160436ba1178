//! The recommendation networks, their losses, training and checkpoints.
//!
//! Every variant maps a [`UserContext`](crate::corpus::UserContext) and a
//! candidate question to a probability. The community variants also need a
//! [`PersonalCache`] of every user's personal vector.

pub mod checkpoint;
pub mod community;
pub mod gradcheck;
pub mod loss;
pub mod network;
pub mod train;
mod variant;

pub use checkpoint::Checkpoint;
pub use community::{community_group, community_group_values, select_neighbours, PersonalCache};
pub use loss::{batch_gradients, batch_loss, cross_entropy, cross_entropy_logits, regularize, regularized_loss, BatchResult, TrainItem};
pub use network::{askme_predict, askme_timestep, Encoded, Graph, Model, ModelSpec};
pub use train::{build_cache, epoch_items, init_model, train, train_model, BatchRecord, TrainOutcome};
pub use variant::Variant;
