use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Candidates in descending score order; equal scores are ordered by
/// question id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub user: String,
    pub questions: Vec<usize>,
    pub scores: Vec<f64>,
    /// 1-based position of the positive, if it was among the candidates.
    pub position: Option<usize>,
}

pub fn rank_candidates(
    user: &str,
    candidates: &[usize],
    scores: &[f64],
    positive: usize,
    question_ids: &[String],
) -> Result<RankedList> {
    if candidates.len() != scores.len() {
        return Err(Error::Eval(format!(
            "user {user}: {} scores for {} candidates",
            scores.len(),
            candidates.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Eval(format!(
            "user {user}: score for question {} is NaN",
            question_ids[candidates[i]]
        )));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| match scores[b].partial_cmp(&scores[a]).expect("no NaN") {
        Ordering::Equal => question_ids[candidates[a]].cmp(&question_ids[candidates[b]]),
        o => o,
    });
    let questions: Vec<usize> = order.iter().map(|&i| candidates[i]).collect();
    let position = questions.iter().position(|&q| q == positive).map(|p| p + 1);
    Ok(RankedList {
        user: user.to_string(),
        scores: order.iter().map(|&i| scores[i]).collect(),
        questions,
        position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("q{i}")).collect()
    }

    #[test]
    fn highest_score_first() {
        let r = rank_candidates("u", &[1, 2], &[0.9, 0.1], 1, &ids(3)).unwrap();
        assert_eq!(r.position, Some(1));
        assert_eq!(r.questions, vec![1, 2]);
    }

    #[test]
    fn ties_break_by_question_id() {
        let r = rank_candidates("u", &[2, 0, 1], &[0.5; 3], 2, &ids(3)).unwrap();
        assert_eq!(r.questions, vec![0, 1, 2]);
        assert_eq!(r.position, Some(3));
    }

    #[test]
    fn nan_names_user_and_question() {
        let err = rank_candidates("alice", &[0, 1], &[0.1, f64::NAN], 0, &ids(2)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alice") && msg.contains("q1"), "{msg}");
    }
}
