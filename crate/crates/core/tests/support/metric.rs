//! Brute-force ranking metrics and randomized ranked-list fixtures.

use askme::eval::{hr_at_k, ndcg_at_k, rank_candidates, RankedList};
use rand::Rng;

use super::toy;

/// Brute-force position: one plus the number of candidates that beat the
/// positive, on score first and question id second.
pub fn brute_position(scores: &[f64], ids: &[String], cands: &[usize], pos_idx: usize) -> usize {
    let (sp, ip) = (scores[pos_idx], &ids[cands[pos_idx]]);
    1 + (0..cands.len())
        .filter(|&i| i != pos_idx)
        .filter(|&i| scores[i] > sp || (scores[i] == sp && ids[cands[i]] < *ip))
        .count()
}

pub fn brute_hr(positions: &[usize], k: usize) -> f64 {
    positions.iter().filter(|&&p| p <= k).count() as f64 / positions.len() as f64
}

pub fn brute_ndcg(positions: &[usize], k: usize) -> f64 {
    let total: f64 = positions
        .iter()
        .filter(|&&p| p <= k)
        .map(|&p| std::f64::consts::LN_2 / ((p + 1) as f64).ln())
        .sum();
    total / positions.len() as f64
}

/// A ranked list over `m + 1` candidates with coarse scores so ties occur.
pub fn fixture(rng: &mut impl Rng, user: usize, ids: &[String], m: usize) -> (RankedList, usize) {
    let mut cands: Vec<usize> = (0..ids.len()).collect();
    for i in 0..=m {
        let j = rng.random_range(i..cands.len());
        cands.swap(i, j);
    }
    cands.truncate(m + 1);
    let scores: Vec<f64> = (0..=m).map(|_| f64::from(rng.random_range(0..20u8)) / 4.0).collect();
    let pos_idx = rng.random_range(0..=m);
    let list = rank_candidates(&format!("u{user}"), &cands, &scores, cands[pos_idx], ids).unwrap();
    (list, brute_position(&scores, ids, &cands, pos_idx))
}


pub struct FixtureComparison {
    pub fixtures: usize,
    pub hr_mismatches: usize,
    pub ndcg_worst: f64,
}

/// Runs `count` random fixtures (up to 40 users, up to 100 candidates each)
/// through the library metrics and the brute-force ones at several K.
pub fn compare_fixtures(count: u64) -> FixtureComparison {
    let ids: Vec<String> = (0..300).map(|i| format!("q{i}")).collect();
    let mut out = FixtureComparison {
        fixtures: count as usize,
        hr_mismatches: 0,
        ndcg_worst: 0.0,
    };
    for f in 0..count {
        let mut rng = toy::rng(10_000 + f);
        let users = rng.random_range(1..40);
        let m = rng.random_range(1..100);
        let (lists, positions): (Vec<RankedList>, Vec<usize>) = (0..users).map(|u| fixture(&mut rng, u, &ids, m)).unzip();
        for (l, &p) in lists.iter().zip(&positions) {
            assert_eq!(l.position, Some(p), "fixture {f}");
            assert!(l.scores.windows(2).all(|w| w[0] >= w[1]), "fixture {f}");
        }
        for k in [1, 3, 5, 10, 20, 50, 100] {
            if hr_at_k(&lists, k).unwrap() != brute_hr(&positions, k) {
                out.hr_mismatches += 1;
            }
            let d = (ndcg_at_k(&lists, k).unwrap() - brute_ndcg(&positions, k)).abs();
            out.ndcg_worst = out.ndcg_worst.max(d);
        }
    }
    out
}
