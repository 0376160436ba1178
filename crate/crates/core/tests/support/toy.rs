//! Small random models and histories for oracle and property tests.

use askme::config::RunConfig;
use askme::corpus::sampling::stream_rng;
use askme::corpus::{Segment, UserContext};
use askme::encoders::EmbeddingTable;
use askme::model::{Model, ModelSpec, PersonalCache, Variant};
use askme::numcore::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::oracle;

pub fn rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 0x7e57, 0)
}

pub fn vector(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn vectors(rng: &mut impl Rng, count: usize, n: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..count).map(|_| vector(rng, n, scale)).collect()
}

pub fn model(variant: Variant, fixed: usize, learned: usize, questions: usize, similar: usize, rng: &mut impl Rng) -> Model {
    let table = EmbeddingTable::from_tensor(
        &Tensor::matrix(questions, fixed, vector(rng, questions * fixed, 1.0)).unwrap(),
        learned,
    )
    .unwrap();
    let cfg = RunConfig {
        variant,
        fixed_dim: fixed,
        learned_dim: learned,
        similar_users: similar,
        ..RunConfig::default()
    };
    Model::init(ModelSpec::from_config(&cfg), table, 0.5, rng).unwrap()
}

/// A history of `answers` answers whose segments hold up to `seg` items each.
pub struct History {
    pub user: usize,
    pub answers: Vec<usize>,
    pub segments: Vec<Segment>,
    pub target: Segment,
}

fn pick(rng: &mut impl Rng, questions: usize, seg: usize) -> Vec<usize> {
    let n = rng.random_range(0..=seg);
    (0..n).map(|_| rng.random_range(0..questions)).collect()
}

fn segment(rng: &mut impl Rng, questions: usize, seg: usize) -> Segment {
    let follows = pick(rng, questions, seg);
    let votes = pick(rng, questions, seg);
    Segment { follows, votes }
}

impl History {
    pub fn random(rng: &mut impl Rng, user: usize, answers: usize, questions: usize, seg: usize) -> Self {
        Self {
            user,
            answers: (0..answers).map(|_| rng.random_range(0..questions)).collect(),
            segments: (0..answers).map(|_| segment(rng, questions, seg)).collect(),
            target: segment(rng, questions, seg),
        }
    }

    pub fn ctx(&self) -> UserContext<'_> {
        UserContext {
            user: self.user,
            answers: &self.answers,
            segments: &self.segments,
            target: &self.target,
        }
    }

    pub fn plain(&self) -> oracle::History {
        let pair = |s: &Segment| (s.follows.clone(), s.votes.clone());
        oracle::History {
            answers: self.answers.clone(),
            segments: self.segments.iter().map(pair).collect(),
            target: pair(&self.target),
        }
    }
}

pub fn cache(rng: &mut impl Rng, users: usize, dim: usize) -> PersonalCache {
    PersonalCache::new(0, dim, vectors(rng, users, dim, 1.0)).unwrap()
}
