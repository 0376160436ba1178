//! Leave-one-out top-K evaluation.
//!
//! Every test user's held-out answer is ranked against `M` sampled negatives.
//! Hit ratio and NDCG are then averaged over users.

mod evaluate;
mod metrics;
mod ranking;
mod report;
mod scorers;

pub use evaluate::{candidate_set, evaluate, EvalOptions, Evaluation};
pub use metrics::{hr_at_k, hr_from_positions, ndcg_at_k, ndcg_from_positions, ndcg_single};
pub use ranking::{rank_candidates, RankedList};
pub use report::{mean_and_std, positions_tsv, RankingReport};
pub use scorers::{ModelScorer, OracleScorer, PopularityScorer, RandomScorer, Scorer};
