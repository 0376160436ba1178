//! Behavior logs, per-user timelines, leave-one-out splits, negative sampling
//! and the synthetic planted-topic generator.

pub mod dataset;
pub mod embfile;
pub mod indexed;
pub mod log;
pub mod sampling;
pub mod split;
pub mod synth;
pub mod timeline;

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

pub use dataset::Dataset;
pub use indexed::{IndexedData, Segment, UserContext, UserHistory};
pub use log::{parse_log, parse_log_str, write_log};
pub use sampling::{sample_negatives, CandidateSet};
pub use split::{leave_one_out, Split, TestRecord};
pub use synth::{generate_synthetic, SynthConfig, SyntheticData};
pub use timeline::{build_timelines, AnswerStep, DropReport, SegmentEvent, UserTimeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BehaviorKind {
    Answer,
    Follow,
    Vote,
}

impl BehaviorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorKind::Answer => "answer",
            BehaviorKind::Follow => "follow",
            BehaviorKind::Vote => "vote",
        }
    }
}

impl fmt::Display for BehaviorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BehaviorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "answer" => Ok(BehaviorKind::Answer),
            "follow" => Ok(BehaviorKind::Follow),
            "vote" => Ok(BehaviorKind::Vote),
            other => Err(Error::invalid(format!("unknown behavior kind {other:?}"))),
        }
    }
}

/// One `(user, question, kind, timestamp)` record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorEvent {
    pub user: String,
    pub question: String,
    pub kind: BehaviorKind,
    pub timestamp: u64,
}

impl BehaviorEvent {
    pub fn new(user: &str, question: &str, kind: BehaviorKind, timestamp: u64) -> Self {
        Self {
            user: user.to_string(),
            question: question.to_string(),
            kind,
            timestamp,
        }
    }
}
