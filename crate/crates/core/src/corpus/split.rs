use super::timeline::{AnswerStep, UserTimeline};
use crate::error::{Error, Result};

/// A held-out final answer together with the segments that preceded it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestRecord {
    pub user: String,
    pub step: AnswerStep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<UserTimeline>,
    pub test: Vec<TestRecord>,
}

/// Moves each user's last answer into the test set.
pub fn leave_one_out(timelines: &[UserTimeline]) -> Result<Split> {
    let mut train = Vec::with_capacity(timelines.len());
    let mut test = Vec::with_capacity(timelines.len());
    for tl in timelines {
        if tl.steps.len() < 2 {
            return Err(Error::invalid(format!(
                "user {} has {} answers; leave-one-out needs at least 2",
                tl.user,
                tl.steps.len()
            )));
        }
        let (last, rest) = tl.steps.split_last().expect("non-empty");
        train.push(UserTimeline {
            user: tl.user.clone(),
            steps: rest.to_vec(),
        });
        test.push(TestRecord {
            user: tl.user.clone(),
            step: last.clone(),
        });
    }
    Ok(Split { train, test })
}
