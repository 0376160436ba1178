use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use super::embfile::EmbeddingMatrix;
use super::log::parse_log;
use super::synth::SyntheticData;
use super::BehaviorEvent;
use crate::error::{Error, Result};

pub const BEHAVIORS_FILE: &str = "behaviors.tsv";
pub const TOPICS_FILE: &str = "topics.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.f32";

/// A data directory: the behavior log, the question universe, and optionally
/// the frozen part of the question embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub events: Vec<BehaviorEvent>,
    /// Row order of the embedding table.
    pub question_ids: Vec<String>,
    pub embeddings: Option<EmbeddingMatrix>,
}

impl Dataset {
    /// Loads `behaviors.tsv`, plus `topics.tsv` and `embeddings.f32` when present.
    ///
    /// Without `topics.tsv` the question universe is the sorted set of ids in the log.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let events = parse_log(dir.join(BEHAVIORS_FILE))?;
        let topics_path = dir.join(TOPICS_FILE);
        let question_ids = if topics_path.exists() {
            let text = fs::read_to_string(&topics_path)?;
            let mut ids = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.is_empty() {
                    continue;
                }
                let id = line.split('\t').next().unwrap_or_default();
                if id.is_empty() {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("{TOPICS_FILE}: empty question id"),
                    });
                }
                ids.push(id.to_string());
            }
            ids
        } else {
            events
                .iter()
                .map(|e| e.question.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        };
        let emb_path = dir.join(EMBEDDINGS_FILE);
        let embeddings = if emb_path.exists() {
            Some(EmbeddingMatrix::read(emb_path)?)
        } else {
            None
        };
        let ds = Self {
            events,
            question_ids,
            embeddings,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn from_synthetic(data: &SyntheticData) -> Self {
        Self {
            events: data.events.clone(),
            question_ids: data.question_ids.clone(),
            embeddings: Some(data.embeddings.clone()),
        }
    }

    pub fn question_index(&self) -> HashMap<&str, usize> {
        self.question_ids
            .iter()
            .enumerate()
            .map(|(i, q)| (q.as_str(), i))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let index = self.question_index();
        if index.len() != self.question_ids.len() {
            return Err(Error::invalid("duplicate question ids in question list"));
        }
        if let Some(e) = self.events.iter().find(|e| !index.contains_key(e.question.as_str())) {
            return Err(Error::invalid(format!("event references unknown question {}", e.question)));
        }
        if let Some(m) = &self.embeddings {
            if m.rows != self.question_ids.len() {
                return Err(Error::invalid(format!(
                    "embedding file has {} rows for {} questions",
                    m.rows,
                    self.question_ids.len()
                )));
            }
        }
        Ok(())
    }
}
