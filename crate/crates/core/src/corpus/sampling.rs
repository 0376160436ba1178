use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The ranking candidates for one test user: the held-out positive plus `M`
/// sampled negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub positive: usize,
    pub negatives: Vec<usize>,
}

impl CandidateSet {
    /// Positive first, then negatives in sampling order.
    pub fn all(&self) -> Vec<usize> {
        std::iter::once(self.positive)
            .chain(self.negatives.iter().copied())
            .collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream separators for [`stream_rng`].
pub mod stream {
    pub const EVAL_NEGATIVES: u64 = 1;
    pub const TRAIN_NEGATIVES: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const RANDOM_SCORER: u64 = 4;
    pub const INIT: u64 = 5;
}

/// Independent, reproducible generator for `(seed, stream, index)`.
pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Draws `m` distinct question indices uniformly from `0..n_questions`
/// excluding `answered`.
pub fn sample_negatives<R: Rng + ?Sized>(
    user: &str,
    n_questions: usize,
    answered: &HashSet<usize>,
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let excluded = answered.iter().filter(|&&q| q < n_questions).count();
    let available = n_questions - excluded;
    if available < m {
        return Err(Error::InsufficientPool {
            user: user.to_string(),
            needed: m,
            available,
        });
    }
    if available >= 2 * m {
        // rejection sampling: cheap when the pool dwarfs the draw
        let mut chosen = Vec::with_capacity(m);
        let mut seen = HashSet::with_capacity(m);
        while chosen.len() < m {
            let q = rng.random_range(0..n_questions);
            if !answered.contains(&q) && seen.insert(q) {
                chosen.push(q);
            }
        }
        Ok(chosen)
    } else {
        let mut pool: Vec<usize> = (0..n_questions).filter(|q| !answered.contains(q)).collect();
        for i in 0..m {
            let j = rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(m);
        Ok(pool)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhausts_exact_pool() {
        // questions 0..=100, user answered 0 -> pool of exactly 100, ask 99 of 100 after excluding 1 more
        let answered: HashSet<usize> = [0, 1].into_iter().collect();
        let mut rng = stream_rng(7, 0, 0);
        let mut got = sample_negatives("u", 101, &answered, 99, &mut rng).unwrap();
        got.sort_unstable();
        assert_eq!(got, (2..101).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_for_seed() {
        let answered = HashSet::from([3usize]);
        let a = sample_negatives("u", 500, &answered, 50, &mut stream_rng(1, 2, 3)).unwrap();
        let b = sample_negatives("u", 500, &answered, 50, &mut stream_rng(1, 2, 3)).unwrap();
        assert_eq!(a, b);
        let c = sample_negatives("u", 500, &answered, 50, &mut stream_rng(1, 2, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn insufficient_pool_names_user() {
        let answered = HashSet::from([0usize, 1]);
        let err = sample_negatives("alice", 5, &answered, 4, &mut stream_rng(0, 0, 0)).unwrap_err();
        assert!(err.to_string().contains("alice"));
    }

    #[test]
    fn never_emits_answered_or_duplicates() {
        let answered: HashSet<usize> = (0..30).step_by(3).collect();
        for s in 0..50 {
            let got = sample_negatives("u", 60, &answered, 25, &mut stream_rng(s, 0, 0)).unwrap();
            let uniq: HashSet<_> = got.iter().collect();
            assert_eq!(uniq.len(), 25);
            assert!(got.iter().all(|q| !answered.contains(q)));
        }
    }

    #[test]
    fn inclusion_frequency_is_uniform() {
        // 10k draws of 10 from 40 eligible questions: each is included with p = 1/4.
        let answered: HashSet<usize> = [0usize, 1, 2, 3].into_iter().collect();
        let (n, m, draws) = (44usize, 10usize, 10_000u64);
        let mut counts = vec![0u64; n];
        for d in 0..draws {
            for q in sample_negatives("u", n, &answered, m, &mut stream_rng(99, 0, d)).unwrap() {
                counts[q] += 1;
            }
        }
        let p = m as f64 / 40.0;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (q, &c) in counts.iter().enumerate() {
            if q < 4 {
                assert_eq!(c, 0);
            } else {
                assert!((c as f64 - mean).abs() <= 3.0 * sigma, "q{q}: {c} vs {mean}");
            }
        }
    }
}
