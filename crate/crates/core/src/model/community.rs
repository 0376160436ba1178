use std::cmp::Ordering;

use crate::config::GroupWeighting;
use crate::error::{Error, Result};
use crate::numcore::ops::dot;
use crate::numcore::{NodeId, Tape, Tensor};

/// Snapshot of every user's personal vector, row `u` for user index `u`.
///
/// Built whole and swapped whole; nothing mutates a cache in place.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonalCache {
    pub epoch: usize,
    dim: usize,
    vectors: Vec<f64>,
}

impl PersonalCache {
    pub fn new(epoch: usize, dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("personal cache width must be positive"));
        }
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        for (u, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::shape("personal cache row", &[u, r.len()], &[dim]));
            }
            vectors.extend_from_slice(r);
        }
        Ok(Self { epoch, dim, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, user: usize) -> &[f64] {
        &self.vectors[user * self.dim..(user + 1) * self.dim]
    }

    /// Every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            epoch: self.epoch,
            dim: self.dim,
            vectors: self.vectors.iter().map(|v| v * factor).collect(),
        }
    }
}

/// The `n` users most similar to `personal` by dot product, excluding
/// `exclude`, as `(user, similarity)` in descending similarity. Ties go to the
/// lower user index. Fewer than `n` are returned when the cache is short.
pub fn select_neighbours(personal: &[f64], cache: &PersonalCache, exclude: Option<usize>, n: usize) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = (0..cache.len())
        .filter(|&l| Some(l) != exclude)
        .map(|l| (l, dot(personal, cache.get(l))))
        .collect();
    scored.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    scored.truncate(n);
    scored
}

/// Group representation: the selected neighbours' cached vectors pooled with
/// weights derived from their similarities to `personal`. The zero vector
/// when nobody is selected. Gradients flow into `personal` through the
/// similarities; the cached vectors are constants.
pub fn community_group(
    tape: &mut Tape<'_>,
    personal: NodeId,
    cache: &PersonalCache,
    exclude: Option<usize>,
    n: usize,
    weighting: GroupWeighting,
) -> Result<NodeId> {
    let d = cache.dim();
    if tape.shape(personal) != [d] {
        return Err(Error::shape("community_group", tape.shape(personal), &[d]));
    }
    let chosen = select_neighbours(tape.data(personal), cache, exclude, n);
    if chosen.is_empty() {
        return Ok(tape.zeros(d));
    }
    let mut rows = Vec::with_capacity(chosen.len() * d);
    for &(l, _) in &chosen {
        rows.extend_from_slice(cache.get(l));
    }
    let neighbours = tape.constant(Tensor::matrix(chosen.len(), d, rows)?);
    let sims = tape.matvec(neighbours, personal)?;
    let weights = match weighting {
        GroupWeighting::Softmax => tape.softmax(sims)?,
        GroupWeighting::Raw => sims,
    };
    tape.mat_t_vec(neighbours, weights)
}

/// Value-level [`community_group`].
pub fn community_group_values(
    personal: &[f64],
    cache: &PersonalCache,
    exclude: Option<usize>,
    n: usize,
    weighting: GroupWeighting,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let p = tape.constant(Tensor::new(vec![personal.len()], personal.to_vec())?);
    let g = community_group(&mut tape, p, cache, exclude, n, weighting)?;
    Ok(tape.data(g).to_vec())
}
