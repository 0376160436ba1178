use super::ranking::RankedList;
use crate::error::{Error, Result};

fn check(n: usize, k: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("metric over no ranked lists"));
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    Ok(())
}

/// Fraction of users whose positive sits at 1-based position `≤ k`.
pub fn hr_from_positions(positions: &[Option<usize>], k: usize) -> Result<f64> {
    check(positions.len(), k)?;
    let hits = positions.iter().filter(|p| p.is_some_and(|j| j <= k)).count();
    Ok(hits as f64 / positions.len() as f64)
}

/// Per-user NDCG with a single relevant item: `1 / log2(1 + j)` for a hit at
/// position `j ≤ k`, else 0.
pub fn ndcg_single(position: Option<usize>, k: usize) -> f64 {
    match position {
        Some(j) if j >= 1 && j <= k => 1.0 / ((1 + j) as f64).log2(),
        _ => 0.0,
    }
}

/// Mean of [`ndcg_single`]. Hits are tallied per position first, so the
/// result does not depend on the order of `positions`.
pub fn ndcg_from_positions(positions: &[Option<usize>], k: usize) -> Result<f64> {
    check(positions.len(), k)?;
    let mut tally = std::collections::BTreeMap::new();
    for &j in positions.iter().flatten() {
        if j >= 1 && j <= k {
            *tally.entry(j).or_insert(0usize) += 1;
        }
    }
    let total: f64 = tally
        .iter()
        .map(|(&j, &c)| c as f64 * ndcg_single(Some(j), k))
        .sum();
    Ok(total / positions.len() as f64)
}

pub fn hr_at_k(lists: &[RankedList], k: usize) -> Result<f64> {
    hr_from_positions(&lists.iter().map(|l| l.position).collect::<Vec<_>>(), k)
}

pub fn ndcg_at_k(lists: &[RankedList], k: usize) -> Result<f64> {
    ndcg_from_positions(&lists.iter().map(|l| l.position).collect::<Vec<_>>(), k)
}
