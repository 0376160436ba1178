use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The full model and its ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Individual- plus community-level interaction.
    #[serde(rename = "AskMe")]
    AskMe,
    /// Answer history only.
    #[serde(rename = "AskMe_A")]
    AskMeA,
    /// Multi-view: answer history plus the latest follow/vote segment.
    #[serde(rename = "AskMe_M")]
    AskMeM,
    /// Individual-level interaction without the community term.
    #[serde(rename = "AskMe_B")]
    AskMeB,
    /// Community term only.
    #[serde(rename = "AskMe_P")]
    AskMeP,
    /// Multi-view plus community term.
    #[serde(rename = "AskMe_MP")]
    AskMeMP,
    /// Same architecture as `AskMe_M`, under its model name.
    #[serde(rename = "MultiView")]
    MultiView,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::MultiView,
        Variant::AskMeA,
        Variant::AskMeM,
        Variant::AskMeB,
        Variant::AskMeP,
        Variant::AskMeMP,
        Variant::AskMe,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Variant::AskMe => "AskMe",
            Variant::AskMeA => "AskMe_A",
            Variant::AskMeM => "AskMe_M",
            Variant::AskMeB => "AskMe_B",
            Variant::AskMeP => "AskMe_P",
            Variant::AskMeMP => "AskMe_MP",
            Variant::MultiView => "MultiView",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Variant::AskMe => 0,
            Variant::AskMeA => 1,
            Variant::AskMeM => 2,
            Variant::AskMeB => 3,
            Variant::AskMeP => 4,
            Variant::AskMeMP => 5,
            Variant::MultiView => 6,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.code() == code)
    }

    /// Bi-LSTM over the answer sequence feeding a multi-view or projection head.
    pub fn uses_answer_encoder(self) -> bool {
        !matches!(self, Variant::AskMe | Variant::AskMeB)
    }

    /// Per-step fusion of answer/follow/vote signals.
    pub fn uses_individual(self) -> bool {
        matches!(self, Variant::AskMe | Variant::AskMeB)
    }

    /// Sigmoid head over `[p_u; q]`.
    pub fn uses_multiview_head(self) -> bool {
        matches!(self, Variant::AskMeA | Variant::AskMeM | Variant::AskMeMP | Variant::MultiView)
    }

    /// Follow/vote attention against the candidate question.
    pub fn uses_candidate_attention(self) -> bool {
        matches!(self, Variant::AskMeM | Variant::AskMeMP | Variant::MultiView)
    }

    /// Similar-user pooling from the personal cache.
    pub fn uses_community(self) -> bool {
        matches!(self, Variant::AskMe | Variant::AskMeP | Variant::AskMeMP)
    }

    /// Produces a personal vector (cacheable, candidate independent).
    pub fn has_personal(self) -> bool {
        self.uses_individual() || self.uses_community()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.token() == s)
            .ok_or_else(|| Error::Config(format!("unknown model variant {s:?}")))
    }
}
