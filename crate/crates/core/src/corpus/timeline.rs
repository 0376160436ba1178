use std::collections::BTreeMap;

use super::{BehaviorEvent, BehaviorKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentEvent {
    pub question: String,
    pub timestamp: u64,
}

/// One answer together with the follow/vote events that led up to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerStep {
    pub question: String,
    pub timestamp: u64,
    /// At most `L` follows, oldest first.
    pub follows: Vec<SegmentEvent>,
    /// At most `L` votes, oldest first.
    pub votes: Vec<SegmentEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserTimeline {
    pub user: String,
    pub steps: Vec<AnswerStep>,
}

impl UserTimeline {
    pub fn answers(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.question.as_str())
    }
}

/// Users left out of the timelines because they answered fewer than two questions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropReport {
    pub dropped: Vec<(String, usize)>,
}

/// Groups events per user and attaches every follow/vote to the first answer
/// with a strictly later timestamp, keeping the `segment_cap` most recent.
///
/// Answers are ordered by timestamp with file order breaking ties. Segment
/// events matching the answer of their own step are discarded, as are events
/// after a user's last answer. Users come back sorted by id.
pub fn build_timelines(
    events: &[BehaviorEvent],
    segment_cap: usize,
) -> Result<(Vec<UserTimeline>, DropReport)> {
    if segment_cap == 0 {
        return Err(Error::invalid("segment cap must be at least 1"));
    }
    let mut by_user: BTreeMap<&str, Vec<(usize, &BehaviorEvent)>> = BTreeMap::new();
    for (order, e) in events.iter().enumerate() {
        by_user.entry(e.user.as_str()).or_default().push((order, e));
    }

    let mut timelines = Vec::new();
    let mut report = DropReport::default();
    for (user, evs) in by_user {
        let mut answers: Vec<(usize, &BehaviorEvent)> = evs
            .iter()
            .filter(|(_, e)| e.kind == BehaviorKind::Answer)
            .copied()
            .collect();
        answers.sort_by_key(|(order, e)| (e.timestamp, *order));
        if answers.len() < 2 {
            report.dropped.push((user.to_string(), answers.len()));
            continue;
        }

        let mut follows: Vec<Vec<(u64, usize, &str)>> = vec![Vec::new(); answers.len()];
        let mut votes: Vec<Vec<(u64, usize, &str)>> = vec![Vec::new(); answers.len()];
        for &(order, e) in &evs {
            let bucket = match e.kind {
                BehaviorKind::Answer => continue,
                BehaviorKind::Follow => &mut follows,
                BehaviorKind::Vote => &mut votes,
            };
            // first answer strictly after the event
            let step = answers.partition_point(|(_, a)| a.timestamp <= e.timestamp);
            if step < answers.len() && e.question != answers[step].1.question {
                bucket[step].push((e.timestamp, order, e.question.as_str()));
            }
        }

        let keep_recent = |mut seg: Vec<(u64, usize, &str)>| -> Vec<SegmentEvent> {
            seg.sort_unstable();
            let start = seg.len().saturating_sub(segment_cap);
            seg[start..]
                .iter()
                .map(|&(timestamp, _, q)| SegmentEvent {
                    question: q.to_string(),
                    timestamp,
                })
                .collect()
        };

        let steps = answers
            .iter()
            .zip(follows.into_iter().zip(votes))
            .map(|(&(_, a), (f, v))| AnswerStep {
                question: a.question.clone(),
                timestamp: a.timestamp,
                follows: keep_recent(f),
                votes: keep_recent(v),
            })
            .collect();
        timelines.push(UserTimeline {
            user: user.to_string(),
            steps,
        });
    }
    Ok((timelines, report))
}
