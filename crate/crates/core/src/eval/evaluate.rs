use super::metrics::{hr_at_k, ndcg_at_k};
use super::ranking::{rank_candidates, RankedList};
use super::report::RankingReport;
use super::scorers::{user_key, Scorer};
use crate::corpus::sampling::{stream, stream_rng};
use crate::corpus::{sample_negatives, CandidateSet, IndexedData};
use crate::error::{Error, Result};
use crate::par::{self, Exec};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Sampled negatives per user (`M`).
    pub negatives: usize,
    pub ks: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: RankingReport,
    pub lists: Vec<RankedList>,
}

/// The held-out answer plus `m` negatives the user never answered, drawn
/// from a stream keyed by the user id.
pub fn candidate_set(data: &IndexedData, user: usize, m: usize, seed: u64) -> Result<CandidateSet> {
    let h = &data.users[user];
    let mut rng = stream_rng(seed, stream::EVAL_NEGATIVES, user_key(&h.user));
    Ok(CandidateSet {
        positive: h.test_answer,
        negatives: sample_negatives(&h.user, data.n_questions(), &h.answered, m, &mut rng)?,
    })
}

/// Ranks every test user's candidates with `scorer` and aggregates HR@K and
/// NDCG@K for each requested K.
pub fn evaluate(scorer: &dyn Scorer, data: &IndexedData, opts: &EvalOptions, exec: Exec) -> Result<Evaluation> {
    if data.users.is_empty() {
        return Err(Error::invalid("no test users"));
    }
    if opts.ks.is_empty() || opts.ks.contains(&0) {
        return Err(Error::invalid("K list must be non-empty with every K >= 1"));
    }
    let users: Vec<usize> = (0..data.users.len()).collect();
    let lists = par::try_map(exec, &users, |&u| {
        let cands = candidate_set(data, u, opts.negatives, opts.seed)?.all();
        let scores = scorer.score(data, u, &cands)?;
        rank_candidates(&data.users[u].user, &cands, &scores, data.users[u].test_answer, &data.question_ids)
    })?;
    let mut hr = Vec::with_capacity(opts.ks.len());
    let mut ndcg = Vec::with_capacity(opts.ks.len());
    for &k in &opts.ks {
        hr.push(hr_at_k(&lists, k)?);
        ndcg.push(ndcg_at_k(&lists, k)?);
    }
    Ok(Evaluation {
        report: RankingReport {
            scorer: scorer.name(),
            ks: opts.ks.clone(),
            hr,
            ndcg,
            pool_size: opts.negatives + 1,
            users: lists.len(),
            seed: opts.seed,
        },
        lists,
    })
}
