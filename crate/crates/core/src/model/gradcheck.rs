//! Finite-difference verification of every variant's full loss gradient on
//! small synthetic instances.

use rand::seq::index::sample;

use super::loss::{batch_gradients, batch_loss, TrainItem};
use super::network::{Model, ModelSpec};
use super::train::{build_cache, epoch_items};
use super::variant::Variant;
use crate::config::RunConfig;
use crate::corpus::sampling::{stream, stream_rng};
use crate::corpus::{generate_synthetic, Dataset, IndexedData, SynthConfig};
use crate::encoders::EmbeddingTable;
use crate::error::Result;
use crate::numcore::relative_error;
use crate::par::Exec;

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub fixed_dim: usize,
    pub learned_dim: usize,
    pub eps: f64,
    pub tolerance: f64,
    /// Coordinates checked per tensor; smaller tensors are checked in full.
    pub samples_per_tensor: usize,
    pub init_std: f64,
    /// Perturbs the analytic gradient so the check must fail.
    pub corrupt: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            fixed_dim: 5,
            learned_dim: 3,
            eps: 1e-5,
            tolerance: 1e-5,
            samples_per_tensor: 32,
            init_std: 0.5,
            corrupt: false,
        }
    }
}

/// Worst coordinate of one tensor over every checked seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRow {
    pub variant: Variant,
    pub tensor: String,
    pub max_rel_err: f64,
    pub checked: usize,
}

impl GradcheckRow {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_err <= tolerance
    }
}

struct Instance {
    model: Model,
    data: IndexedData,
    items: Vec<TrainItem>,
}

fn instance(variant: Variant, cfg: &RunConfig, opts: &GradcheckOptions, seed: u64) -> Result<Instance> {
    let synth = generate_synthetic(&SynthConfig {
        users: 8,
        questions: 40,
        topics: 3,
        answers_per_user: 4,
        follow_rate: 1.5,
        vote_rate: 1.5,
        embedding_dim: opts.fixed_dim.max(1),
        seed,
        ..SynthConfig::default()
    })?;
    let ds = Dataset::from_synthetic(&synth);
    let data = IndexedData::build(&ds, cfg.segment_len)?;
    let fixed = (opts.fixed_dim > 0).then_some(&synth.embeddings);
    let table = EmbeddingTable::new(data.n_questions(), opts.fixed_dim, opts.learned_dim, fixed)?;
    let spec = ModelSpec {
        variant,
        fixed_dim: opts.fixed_dim,
        learned_dim: opts.learned_dim,
        ..ModelSpec::from_config(cfg)
    };
    let model = Model::init(spec, table, opts.init_std, &mut stream_rng(seed, stream::INIT, variant.code().into()))?;
    // a few contexts from distinct users, one positive and two negatives each
    let all = epoch_items(&data, 2, seed, 0)?;
    let mut items: Vec<TrainItem> = Vec::new();
    for it in all {
        if items.last().is_none_or(|l| l.user != it.user) {
            items.push(it);
        }
        if items.len() == 3 {
            break;
        }
    }
    Ok(Instance { model, data, items })
}

/// Checks `variant` on one seed, returning one row per parameter tensor.
pub fn check_variant(variant: Variant, cfg: &RunConfig, opts: &GradcheckOptions, seed: u64) -> Result<Vec<GradcheckRow>> {
    let Instance { mut model, data, items } = instance(variant, cfg, opts, seed)?;
    let cache = if variant.uses_community() {
        Some(build_cache(&model, &data, 0, Exec::Sequential)?)
    } else {
        None
    };
    let mut analytic = batch_gradients(&model, &data, &items, cache.as_ref(), Exec::Sequential)?.grads;
    if opts.corrupt {
        analytic.scale(1.0 + 1e-3);
    }
    let mut rng = stream_rng(seed, stream::INIT, 1000 + u64::from(variant.code()));
    let mut rows = Vec::new();
    for id in model.params.ids().collect::<Vec<_>>() {
        let grad = analytic.get(id).data().to_vec();
        let n = grad.len();
        let coords: Vec<usize> = if n <= opts.samples_per_tensor {
            (0..n).collect()
        } else {
            // the largest analytic entries plus a uniform sample
            let mut by_size: Vec<usize> = (0..n).collect();
            by_size.sort_by(|&a, &b| grad[b].abs().total_cmp(&grad[a].abs()).then(a.cmp(&b)));
            let half = opts.samples_per_tensor / 2;
            let mut c: Vec<usize> = by_size[..half].to_vec();
            c.extend(sample(&mut rng, n, opts.samples_per_tensor - half).into_iter());
            c.sort_unstable();
            c.dedup();
            c
        };
        let mut worst = 0.0f64;
        for &k in &coords {
            let x0 = model.params.get(id).data()[k];
            model.params.get_mut(id).data_mut()[k] = x0 + opts.eps;
            let up = batch_loss(&model, &data, &items, cache.as_ref(), Exec::Sequential)?;
            model.params.get_mut(id).data_mut()[k] = x0 - opts.eps;
            let down = batch_loss(&model, &data, &items, cache.as_ref(), Exec::Sequential)?;
            model.params.get_mut(id).data_mut()[k] = x0;
            let numeric = (up - down) / (2.0 * opts.eps);
            let err = relative_error(grad[k], numeric);
            worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
        }
        rows.push(GradcheckRow {
            variant,
            tensor: model.params.name(id).to_string(),
            max_rel_err: worst,
            checked: coords.len(),
        });
    }
    Ok(rows)
}

/// [`check_variant`] over several seeds, keeping the worst error per tensor.
pub fn check_variant_seeds(variant: Variant, cfg: &RunConfig, opts: &GradcheckOptions, seeds: &[u64]) -> Result<Vec<GradcheckRow>> {
    let mut merged: Vec<GradcheckRow> = Vec::new();
    for &s in seeds {
        for row in check_variant(variant, cfg, opts, s)? {
            match merged.iter_mut().find(|r| r.tensor == row.tensor) {
                Some(m) => {
                    m.max_rel_err = m.max_rel_err.max(row.max_rel_err);
                    m.checked += row.checked;
                }
                None => merged.push(row),
            }
        }
    }
    Ok(merged)
}
