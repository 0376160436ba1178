use rand::Rng;

use crate::corpus::sampling::{stream, stream_rng};
use crate::corpus::IndexedData;
use crate::error::Result;
use crate::model::{build_cache, Model, PersonalCache};
use crate::par::Exec;

/// Scores candidate questions for one test user; higher ranks first.
pub trait Scorer: Sync {
    fn name(&self) -> String;
    fn score(&self, data: &IndexedData, user: usize, candidates: &[usize]) -> Result<Vec<f64>>;
}

/// FNV-1a, so per-user streams depend on the id and not on iteration order.
pub(crate) fn user_key(user: &str) -> u64 {
    user.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// A trained model, scoring by pre-sigmoid logit.
pub struct ModelScorer<'m> {
    pub model: &'m Model,
    pub cache: Option<PersonalCache>,
}

impl<'m> ModelScorer<'m> {
    /// Builds the personal cache from `data` when the variant needs one.
    pub fn new(model: &'m Model, data: &IndexedData, exec: Exec) -> Result<Self> {
        let cache = if model.variant().uses_community() {
            Some(build_cache(model, data, 0, exec)?)
        } else {
            None
        };
        Ok(Self { model, cache })
    }
}

impl Scorer for ModelScorer<'_> {
    fn name(&self) -> String {
        self.model.variant().to_string()
    }

    fn score(&self, data: &IndexedData, user: usize, candidates: &[usize]) -> Result<Vec<f64>> {
        let ctx = data.eval_context(user, self.model.spec.max_history);
        self.model.logits(&ctx, candidates, self.cache.as_ref())
    }
}

/// Uniform scores from a per-user seeded stream.
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn name(&self) -> String {
        "random".into()
    }

    fn score(&self, data: &IndexedData, user: usize, candidates: &[usize]) -> Result<Vec<f64>> {
        let mut rng = stream_rng(self.seed, stream::RANDOM_SCORER, user_key(&data.users[user].user));
        Ok(candidates.iter().map(|_| rng.random::<f64>()).collect())
    }
}

/// Training answer frequency of each question.
pub struct PopularityScorer {
    pub counts: Vec<u64>,
}

impl PopularityScorer {
    pub fn from_data(data: &IndexedData) -> Self {
        Self {
            counts: data.train_answer_counts(),
        }
    }
}

impl Scorer for PopularityScorer {
    fn name(&self) -> String {
        "popularity".into()
    }

    fn score(&self, _data: &IndexedData, _user: usize, candidates: &[usize]) -> Result<Vec<f64>> {
        Ok(candidates.iter().map(|&q| self.counts.get(q).copied().unwrap_or(0) as f64).collect())
    }
}

/// Knows the answer: 1 for the held-out question, 0 otherwise.
pub struct OracleScorer;

impl Scorer for OracleScorer {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn score(&self, data: &IndexedData, user: usize, candidates: &[usize]) -> Result<Vec<f64>> {
        let pos = data.users[user].test_answer;
        Ok(candidates.iter().map(|&q| if q == pos { 1.0 } else { 0.0 }).collect())
    }
}
