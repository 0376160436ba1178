use std::collections::HashSet;

use super::dataset::Dataset;
use super::split::{leave_one_out, Split};
use super::timeline::{build_timelines, AnswerStep, DropReport, SegmentEvent};
use crate::error::{Error, Result};

/// Follow and vote question indices preceding one answer, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segment {
    pub follows: Vec<usize>,
    pub votes: Vec<usize>,
}

/// A user's training answers with their segments, and the held-out test step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserHistory {
    pub user: String,
    pub answers: Vec<usize>,
    pub segments: Vec<Segment>,
    pub test_answer: usize,
    pub test_segment: Segment,
    /// Every question the user answered, test answer included.
    pub answered: HashSet<usize>,
}

/// What the model sees when predicting one answer: the preceding answers,
/// their segments, and the follow/vote segment leading up to the target.
#[derive(Debug, Clone, Copy)]
pub struct UserContext<'a> {
    pub user: usize,
    pub answers: &'a [usize],
    pub segments: &'a [Segment],
    pub target: &'a Segment,
}

/// One training prediction: user `user` answering `positive` after their
/// first `prefix` training answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainTarget {
    pub user: usize,
    pub prefix: usize,
    pub positive: usize,
}

/// The leave-one-out split with questions mapped to embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedData {
    pub question_ids: Vec<String>,
    /// Sorted by user id.
    pub users: Vec<UserHistory>,
    pub drop_report: DropReport,
}

impl IndexedData {
    pub fn build(dataset: &Dataset, segment_cap: usize) -> Result<Self> {
        let (timelines, drop_report) = build_timelines(&dataset.events, segment_cap)?;
        let split = leave_one_out(&timelines)?;
        let mut data = Self::from_split(&split, &dataset.question_ids)?;
        data.drop_report = drop_report;
        Ok(data)
    }

    pub fn from_split(split: &Split, question_ids: &[String]) -> Result<Self> {
        let index: std::collections::HashMap<&str, usize> = question_ids
            .iter()
            .enumerate()
            .map(|(i, q)| (q.as_str(), i))
            .collect();
        let lookup = |q: &str| {
            index
                .get(q)
                .copied()
                .ok_or_else(|| Error::invalid(format!("unknown question {q}")))
        };
        let seg = |evs: &[SegmentEvent]| -> Result<Vec<usize>> {
            evs.iter().map(|e| lookup(&e.question)).collect()
        };
        let segment = |s: &AnswerStep| -> Result<Segment> {
            Ok(Segment {
                follows: seg(&s.follows)?,
                votes: seg(&s.votes)?,
            })
        };
        if split.train.len() != split.test.len() {
            return Err(Error::invalid("train and test user lists differ in length"));
        }
        let mut users = Vec::with_capacity(split.train.len());
        for (tl, rec) in split.train.iter().zip(&split.test) {
            if tl.user != rec.user {
                return Err(Error::invalid(format!("split misaligned at {} / {}", tl.user, rec.user)));
            }
            if tl.steps.is_empty() {
                return Err(Error::invalid(format!("user {} has no training answers", tl.user)));
            }
            let answers: Vec<usize> = tl.steps.iter().map(|s| lookup(&s.question)).collect::<Result<_>>()?;
            let segments = tl.steps.iter().map(segment).collect::<Result<_>>()?;
            let test_answer = lookup(&rec.step.question)?;
            let mut answered: HashSet<usize> = answers.iter().copied().collect();
            answered.insert(test_answer);
            users.push(UserHistory {
                user: tl.user.clone(),
                answers,
                segments,
                test_answer,
                test_segment: segment(&rec.step)?,
                answered,
            });
        }
        users.sort_by(|a, b| a.user.cmp(&b.user));
        Ok(Self {
            question_ids: question_ids.to_vec(),
            users,
            drop_report: DropReport::default(),
        })
    }

    pub fn n_questions(&self) -> usize {
        self.question_ids.len()
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.users.binary_search_by(|u| u.user.as_str().cmp(id)).ok()
    }

    /// Context for predicting training answer `prefix` (0-based) of `user`, or
    /// the test answer when `prefix` equals the number of training answers.
    /// At most `max_history` answers are kept, the most recent ones.
    pub fn context(&self, user: usize, prefix: usize, max_history: Option<usize>) -> UserContext<'_> {
        let h = &self.users[user];
        let target = if prefix < h.answers.len() {
            &h.segments[prefix]
        } else {
            &h.test_segment
        };
        let end = prefix.min(h.answers.len());
        let start = max_history.map_or(0, |m| end.saturating_sub(m));
        UserContext {
            user,
            answers: &h.answers[start..end],
            segments: &h.segments[start..end],
            target,
        }
    }

    pub fn eval_context(&self, user: usize, max_history: Option<usize>) -> UserContext<'_> {
        self.context(user, self.users[user].answers.len(), max_history)
    }

    /// Every `(user, prefix)` with a non-empty prefix, in user then prefix order.
    pub fn train_targets(&self) -> Vec<TrainTarget> {
        let mut out = Vec::new();
        for (u, h) in self.users.iter().enumerate() {
            for prefix in 1..h.answers.len() {
                out.push(TrainTarget {
                    user: u,
                    prefix,
                    positive: h.answers[prefix],
                });
            }
        }
        out
    }

    /// How often each question was answered in the training portion.
    pub fn train_answer_counts(&self) -> Vec<u64> {
        let mut counts = vec![0; self.n_questions()];
        for h in &self.users {
            for &q in &h.answers {
                counts[q] += 1;
            }
        }
        counts
    }
}
