use super::community::PersonalCache;
use super::network::Model;
use crate::corpus::IndexedData;
use crate::error::{Error, Result};
use crate::numcore::tape::{bce_logit_value, bce_value};
use crate::numcore::Gradients;
use crate::par::{self, Exec};

/// Mean binary cross-entropy over `(probability, label)` pairs.
pub fn cross_entropy(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("cross-entropy over an empty batch"));
    }
    let total: f64 = pairs.iter().map(|&(p, y)| bce_value(p, y)).sum();
    Ok(total / pairs.len() as f64)
}

/// [`cross_entropy`] over `(logit, label)` pairs, evaluated stably.
pub fn cross_entropy_logits(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("cross-entropy over an empty batch"));
    }
    let total: f64 = pairs.iter().map(|&(z, y)| bce_logit_value(z, y)).sum();
    Ok(total / pairs.len() as f64)
}

/// `ce` plus `lambda` times the mean personal-to-group distance.
pub fn regularize(ce: f64, distances: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be non-negative, got {lambda}")));
    }
    let reg = if distances.is_empty() {
        0.0
    } else {
        distances.iter().sum::<f64>() / distances.len() as f64
    };
    Ok(ce + lambda * reg)
}

/// Cross-entropy of `(probability, label)` pairs plus the regularizer.
pub fn regularized_loss(pairs: &[(f64, f64)], distances: &[f64], lambda: f64) -> Result<f64> {
    regularize(cross_entropy(pairs)?, distances, lambda)
}

/// One user context with its labelled candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub user: usize,
    /// Number of training answers preceding the target.
    pub prefix: usize,
    /// `(question, label)`.
    pub candidates: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub loss: f64,
    pub cross_entropy: f64,
    /// Mean `‖personal − group‖` over the batch's contexts, for community variants.
    pub distance: Option<f64>,
    /// `(logit, label)` of every pair, in batch order.
    pub logits: Vec<(f64, f64)>,
    pub grads: Gradients,
}

struct ItemOutput {
    grads: Option<Gradients>,
    /// `(logit, label)`
    predictions: Vec<(f64, f64)>,
    distance: Option<f64>,
}

fn item_forward(
    model: &Model,
    data: &IndexedData,
    item: &TrainItem,
    cache: Option<&PersonalCache>,
    pair_weight: f64,
    reg_weight: f64,
    with_grads: bool,
) -> Result<ItemOutput> {
    let ctx = data.context(item.user, item.prefix, model.spec.max_history);
    let mut g = model.graph();
    let enc = g.encode(&ctx, cache)?;
    let mut terms = Vec::with_capacity(item.candidates.len() + 1);
    let mut predictions = Vec::with_capacity(item.candidates.len());
    for &(q, y) in &item.candidates {
        let z = g.logit(&enc, q)?;
        predictions.push((g.tape.data(z)[0], y));
        terms.push(g.tape.bce_logit(z, y)?);
    }
    let ce = g.tape.add_all(&terms)?;
    let mut loss = g.tape.scale(ce, pair_weight);
    let mut distance = None;
    if model.variant().uses_community() {
        let (p, gr) = (enc.personal.expect("personal"), enc.group.expect("group"));
        let diff = g.tape.sub(p, gr)?;
        let dist = g.tape.norm2(diff);
        distance = Some(g.tape.data(dist)[0]);
        if reg_weight > 0.0 {
            let reg = g.tape.scale(dist, reg_weight);
            loss = g.tape.add(loss, reg)?;
        }
    }
    let grads = if with_grads { Some(g.tape.backward(loss)?) } else { None };
    Ok(ItemOutput {
        grads,
        predictions,
        distance,
    })
}

fn run_batch(
    model: &Model,
    data: &IndexedData,
    items: &[TrainItem],
    cache: Option<&PersonalCache>,
    exec: Exec,
    with_grads: bool,
) -> Result<(f64, f64, Option<f64>, Vec<(f64, f64)>, Option<Gradients>)> {
    let n_pairs: usize = items.iter().map(|i| i.candidates.len()).sum();
    if items.is_empty() || n_pairs == 0 {
        return Err(Error::invalid("empty training batch"));
    }
    let lambda = model.spec.lambda;
    let pair_weight = 1.0 / n_pairs as f64;
    let reg_weight = lambda / items.len() as f64;
    let outputs = par::try_map(exec, items, |it| {
        item_forward(model, data, it, cache, pair_weight, reg_weight, with_grads)
    })?;
    let mut predictions = Vec::with_capacity(n_pairs);
    let mut distances = Vec::new();
    let mut grads: Option<Gradients> = None;
    for out in outputs {
        predictions.extend(out.predictions);
        distances.extend(out.distance);
        if let Some(g) = out.grads {
            match grads.as_mut() {
                Some(acc) => acc.accumulate(&g),
                None => grads = Some(g),
            }
        }
    }
    let ce = cross_entropy_logits(&predictions)?;
    let loss = regularize(ce, &distances, lambda)?;
    let distance = (!distances.is_empty()).then(|| distances.iter().sum::<f64>() / distances.len() as f64);
    Ok((loss, ce, distance, predictions, grads))
}

/// Loss and its gradient over a batch. Each context is differentiated on its
/// own tape and the gradients are summed in batch order, so the result does
/// not depend on `exec`.
pub fn batch_gradients(
    model: &Model,
    data: &IndexedData,
    items: &[TrainItem],
    cache: Option<&PersonalCache>,
    exec: Exec,
) -> Result<BatchResult> {
    let (loss, cross_entropy, distance, logits, grads) = run_batch(model, data, items, cache, exec, true)?;
    Ok(BatchResult {
        loss,
        cross_entropy,
        distance,
        logits,
        grads: grads.expect("gradients requested"),
    })
}

/// Forward-only [`batch_gradients`].
pub fn batch_loss(
    model: &Model,
    data: &IndexedData,
    items: &[TrainItem],
    cache: Option<&PersonalCache>,
    exec: Exec,
) -> Result<f64> {
    Ok(run_batch(model, data, items, cache, exec, false)?.0)
}
