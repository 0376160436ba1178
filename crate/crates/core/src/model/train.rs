use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;

use super::community::PersonalCache;
use super::loss::{batch_gradients, TrainItem};
use super::network::{Model, ModelSpec};
use crate::config::RunConfig;
use crate::corpus::sampling::{stream, stream_rng};
use crate::corpus::{sample_negatives, IndexedData};
use crate::encoders::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numcore::AdamState;
use crate::par::{self, Exec};

/// Personal vectors of every user from their full training history.
pub fn build_cache(model: &Model, data: &IndexedData, epoch: usize, exec: Exec) -> Result<PersonalCache> {
    let users: Vec<usize> = (0..data.users.len()).collect();
    let rows = par::try_map(exec, &users, |&u| {
        model.personal_vector(&data.eval_context(u, model.spec.max_history))
    })?;
    PersonalCache::new(epoch, model.dim(), rows)
}

/// One optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    /// 1-based.
    pub epoch: usize,
    /// 1-based within the epoch.
    pub batch: usize,
    pub loss: f64,
    pub cross_entropy: f64,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub curve: Vec<BatchRecord>,
}

impl TrainOutcome {
    /// `epoch,batch,loss` with one row per batch.
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,batch,loss\n");
        for r in &self.curve {
            writeln!(s, "{},{},{}", r.epoch, r.batch, r.loss).expect("string write");
        }
        s
    }

    /// Mean of a per-batch quantity over one epoch.
    pub fn epoch_mean(&self, epoch: usize, f: impl Fn(&BatchRecord) -> Option<f64>) -> Option<f64> {
        let vals: Vec<f64> = self.curve.iter().filter(|r| r.epoch == epoch).filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Labelled candidates for every training target: the positive followed by
/// `negatives` sampled questions the user never answered.
pub fn epoch_items(data: &IndexedData, negatives: usize, seed: u64, epoch: usize) -> Result<Vec<TrainItem>> {
    data.train_targets()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let h = &data.users[t.user];
            let mut rng = stream_rng(seed, stream::TRAIN_NEGATIVES, ((epoch as u64) << 32) | i as u64);
            let negs = sample_negatives(&h.user, data.n_questions(), &h.answered, negatives, &mut rng)?;
            let mut candidates = Vec::with_capacity(negatives + 1);
            candidates.push((t.positive, 1.0));
            candidates.extend(negs.into_iter().map(|q| (q, 0.0)));
            Ok(TrainItem {
                user: t.user,
                prefix: t.prefix,
                candidates,
            })
        })
        .collect()
}

/// Consecutive items until each batch holds at least `batch_size` pairs.
fn batches(items: &[TrainItem], batch_size: usize) -> Vec<&[TrainItem]> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut pairs = 0;
    for (i, it) in items.iter().enumerate() {
        pairs += it.candidates.len();
        if pairs >= batch_size {
            out.push(&items[start..=i]);
            start = i + 1;
            pairs = 0;
        }
    }
    if start < items.len() {
        out.push(&items[start..]);
    }
    out
}

/// Freshly initialized model for `cfg`.
pub fn init_model(cfg: &RunConfig, embeddings: EmbeddingTable) -> Result<Model> {
    let mut rng = stream_rng(cfg.seed, stream::INIT, 0);
    Model::init(ModelSpec::from_config(cfg), embeddings, cfg.init_std, &mut rng)
}

/// Mini-batch Adam from a fresh initialization.
pub fn train(cfg: &RunConfig, data: &IndexedData, embeddings: EmbeddingTable, exec: Exec) -> Result<TrainOutcome> {
    train_model(cfg, data, init_model(cfg, embeddings)?, exec, |_| {})
}

/// Mini-batch Adam starting from `model`; `progress` sees every batch.
pub fn train_model(
    cfg: &RunConfig,
    data: &IndexedData,
    mut model: Model,
    exec: Exec,
    mut progress: impl FnMut(&BatchRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train_targets().is_empty() {
        return Err(Error::invalid("no training targets: every user needs two training answers"));
    }
    let community = model.variant().uses_community();
    let mut adam = AdamState::new(&model.params, cfg.lr)?;
    let mut curve = Vec::new();
    for epoch in 1..=cfg.epochs {
        let mut items = epoch_items(data, cfg.train_negatives, cfg.seed, epoch)?;
        items.shuffle(&mut stream_rng(cfg.seed, stream::SHUFFLE, epoch as u64));
        let mut cache: Option<Arc<PersonalCache>> = None;
        for (b, batch) in batches(&items, cfg.batch_size).into_iter().enumerate() {
            let refresh = match cfg.cache_refresh_batches {
                Some(n) => b % n == 0,
                None => b == 0,
            };
            if community && refresh {
                cache = Some(Arc::new(build_cache(&model, data, epoch, exec)?));
            }
            let res = batch_gradients(&model, data, batch, cache.as_deref(), exec)?;
            if !res.loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss: res.loss,
                });
            }
            adam.step(&mut model.params, &res.grads)?;
            let rec = BatchRecord {
                epoch,
                batch: b + 1,
                loss: res.loss,
                cross_entropy: res.cross_entropy,
                distance: res.distance,
            };
            progress(&rec);
            curve.push(rec);
        }
        adam.lr *= cfg.lr_decay;
    }
    Ok(TrainOutcome { model, curve })
}
