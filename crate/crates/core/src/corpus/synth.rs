//! Planted-topic generator standing in for a real CQA crawl.
//!
//! Every question belongs to one topic and its embedding is the topic centroid
//! plus Gaussian noise. Every user draws a Dirichlet preference over topics.
//! Follows and votes come from that preference (with a uniform-noise share),
//! answers mostly from the user's favorite topic. Within a topic, questions
//! have Zipf-like popularity so a popularity baseline is better than chance.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::embfile::EmbeddingMatrix;
use super::log::write_log;
use super::sampling::stream_rng;
use super::{BehaviorEvent, BehaviorKind};
use crate::error::{Error, Result};

const GAP: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub users: usize,
    pub questions: usize,
    pub topics: usize,
    pub answers_per_user: usize,
    /// Mean follows between consecutive answers.
    pub follow_rate: f64,
    /// Mean votes between consecutive answers.
    pub vote_rate: f64,
    /// Share of follow/vote events drawn uniformly, and share of answers whose
    /// topic comes from the sharpened preference instead of the top topic.
    pub noise: f64,
    /// Temperature applied to the preference for noisy answers (< 1 sharpens).
    pub answer_temperature: f64,
    /// Symmetric Dirichlet concentration of user preferences.
    pub preference_concentration: f64,
    /// Zipf exponent of within-topic question popularity.
    pub popularity_skew: f64,
    pub embedding_dim: usize,
    /// Per-coordinate noise around the centroid, relative to the centroid scale.
    pub embedding_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 200,
            questions: 2000,
            topics: 8,
            answers_per_user: 5,
            follow_rate: 5.0,
            vote_rate: 5.0,
            noise: 0.2,
            answer_temperature: 0.5,
            preference_concentration: 0.3,
            popularity_skew: 1.0,
            embedding_dim: 100,
            embedding_noise: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.users == 0 || self.questions == 0 || self.topics == 0 || self.answers_per_user == 0 {
            return bad("users, questions, topics and answers must all be at least 1".into());
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be at least 1".into());
        }
        if self.answers_per_user > self.questions {
            return bad(format!(
                "{} answers per user cannot be distinct among {} questions",
                self.answers_per_user, self.questions
            ));
        }
        for (name, v) in [("follow_rate", self.follow_rate), ("vote_rate", self.vote_rate)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a non-negative finite rate, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1], got {}", self.noise));
        }
        for (name, v) in [
            ("answer_temperature", self.answer_temperature),
            ("preference_concentration", self.preference_concentration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.popularity_skew >= 0.0) || !(self.embedding_noise >= 0.0) {
            return bad("popularity_skew and embedding_noise must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub events: Vec<BehaviorEvent>,
    pub question_ids: Vec<String>,
    pub topics: Vec<usize>,
    pub embeddings: EmbeddingMatrix,
    /// Per-user topic preference, in user order.
    pub preferences: Vec<Vec<f64>>,
}

impl SyntheticData {
    pub fn top_topic(&self, user: usize) -> usize {
        argmax(&self.preferences[user])
    }

    /// Writes `behaviors.tsv`, `topics.tsv` and `embeddings.f32` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_log(dir.join("behaviors.tsv"), &self.events)?;
        let mut topics = String::new();
        for (q, t) in self.question_ids.iter().zip(&self.topics) {
            topics.push_str(&format!("{q}\t{t}\n"));
        }
        fs::write(dir.join("topics.tsv"), topics)?;
        self.embeddings.write(dir.join("embeddings.f32"))?;
        Ok(())
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn id_width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(4)
}

fn weighted_index<R: Rng>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return Some(i);
        }
        x -= w;
    }
    weights.iter().rposition(|&w| w > 0.0)
}

struct World {
    by_topic: Vec<Vec<usize>>,
    popularity: Vec<Vec<f64>>,
}

impl World {
    fn popular_in<R: Rng>(&self, topic: usize, rng: &mut R) -> Option<usize> {
        weighted_index(&self.popularity[topic], rng).map(|i| self.by_topic[topic][i])
    }
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let (nq, k, dim) = (cfg.questions, cfg.topics, cfg.embedding_dim);
    let mut rng: ChaCha8Rng = stream_rng(cfg.seed, 0x5e_ed, 0);

    let mut topics: Vec<usize> = (0..nq).map(|q| q % k).collect();
    topics.shuffle(&mut rng);
    let mut by_topic = vec![Vec::new(); k];
    for (q, &t) in topics.iter().enumerate() {
        by_topic[t].push(q);
    }
    let popularity: Vec<Vec<f64>> = by_topic
        .iter()
        .map(|qs| {
            let mut ranks: Vec<usize> = (0..qs.len()).collect();
            ranks.shuffle(&mut rng);
            ranks
                .into_iter()
                .map(|r| 1.0 / ((r + 1) as f64).powf(cfg.popularity_skew))
                .collect()
        })
        .collect();
    let world = World { by_topic, popularity };

    let scale = 1.0 / (dim as f64).sqrt();
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let centroids: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| unit.sample(&mut rng) * scale).collect())
        .collect();
    let mut emb = Vec::with_capacity(nq * dim);
    for &t in &topics {
        for c in &centroids[t] {
            emb.push((c + unit.sample(&mut rng) * scale * cfg.embedding_noise) as f32);
        }
    }
    let embeddings = EmbeddingMatrix::new(nq, dim, emb)?;

    let gamma = Gamma::new(cfg.preference_concentration, 1.0)
        .map_err(|e| Error::Config(e.to_string()))?;
    let poisson = |rate: f64| -> Result<Option<Poisson<f64>>> {
        if rate == 0.0 {
            return Ok(None);
        }
        Poisson::new(rate).map(Some).map_err(|e| Error::Config(e.to_string()))
    };
    let follow_dist = poisson(cfg.follow_rate)?;
    let vote_dist = poisson(cfg.vote_rate)?;

    let qw = id_width(nq);
    let uw = id_width(cfg.users);
    let question_ids: Vec<String> = (0..nq).map(|q| format!("q{q:0qw$}")).collect();

    let mut events = Vec::new();
    let mut preferences = Vec::with_capacity(cfg.users);
    for u in 0..cfg.users {
        let mut rng = stream_rng(cfg.seed, 0x05e7, u as u64);
        let user = format!("u{u:0uw$}");
        let mut pref: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng).max(1e-300)).collect();
        let total: f64 = pref.iter().sum();
        pref.iter_mut().for_each(|p| *p /= total);
        let top = argmax(&pref);
        let sharp: Vec<f64> = pref.iter().map(|p| p.powf(1.0 / cfg.answer_temperature)).collect();

        let mut answered = vec![false; nq];
        for step in 0..cfg.answers_per_user {
            let lo = step as u64 * GAP;
            let mut side: Vec<(u64, BehaviorKind, usize)> = Vec::new();
            for (kind, dist) in [(BehaviorKind::Follow, &follow_dist), (BehaviorKind::Vote, &vote_dist)] {
                let n = dist.as_ref().map_or(0, |d| d.sample(&mut rng) as usize);
                for _ in 0..n {
                    let q = if rng.random::<f64>() < cfg.noise {
                        rng.random_range(0..nq)
                    } else {
                        let t = weighted_index(&pref, &mut rng).unwrap_or(top);
                        world.popular_in(t, &mut rng).unwrap_or_else(|| rng.random_range(0..nq))
                    };
                    let ts = lo + rng.random_range(1..GAP);
                    side.push((ts, kind, q));
                }
            }
            side.sort_by_key(|&(ts, kind, _)| (ts, kind));
            for (ts, kind, q) in side {
                events.push(BehaviorEvent::new(&user, &question_ids[q], kind, ts));
            }

            let topic = if rng.random::<f64>() < cfg.noise {
                weighted_index(&sharp, &mut rng).unwrap_or(top)
            } else {
                top
            };
            let open: Vec<usize> = world.by_topic[topic].iter().copied().filter(|&q| !answered[q]).collect();
            let q = if open.is_empty() {
                let rest: Vec<usize> = (0..nq).filter(|&q| !answered[q]).collect();
                rest[rng.random_range(0..rest.len())]
            } else {
                let pos: Vec<usize> = world.by_topic[topic]
                    .iter()
                    .enumerate()
                    .filter(|(_, q)| !answered[**q])
                    .map(|(i, _)| i)
                    .collect();
                let w: Vec<f64> = pos.iter().map(|&i| world.popularity[topic][i]).collect();
                open[weighted_index(&w, &mut rng).unwrap_or(0)]
            };
            answered[q] = true;
            events.push(BehaviorEvent::new(&user, &question_ids[q], BehaviorKind::Answer, lo + GAP));
        }
        preferences.push(pref);
    }

    Ok(SyntheticData {
        events,
        question_ids,
        topics,
        embeddings,
        preferences,
    })
}
