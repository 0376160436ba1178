use crate::error::{Error, Result};
use crate::numcore::{NodeId, Tape, Tensor};

/// Attention weights over the items and the weighted sum of the items.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionResult {
    pub weights: Vec<f64>,
    pub pooled: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionNodes {
    pub weights: NodeId,
    pub pooled: NodeId,
}

impl AttentionNodes {
    pub fn values(&self, tape: &Tape<'_>) -> AttentionResult {
        AttentionResult {
            weights: tape.data(self.weights).to_vec(),
            pooled: tape.data(self.pooled).to_vec(),
        }
    }
}

/// `w = softmax(items · query)`, `pooled = Σ w_j items_j`.
pub fn attention_pool(tape: &mut Tape<'_>, items: &[NodeId], query: NodeId) -> Result<AttentionNodes> {
    if items.is_empty() {
        return Err(Error::invalid("attention over no items"));
    }
    let stacked = tape.stack(items)?;
    let logits = tape.matvec(stacked, query)?;
    let weights = tape.softmax(logits)?;
    let pooled = tape.mat_t_vec(stacked, weights)?;
    Ok(AttentionNodes { weights, pooled })
}

/// [`attention_pool`], or the zero vector of length `dim` when there is
/// nothing to attend over.
pub fn pool_or_zero(tape: &mut Tape<'_>, items: &[NodeId], query: NodeId, dim: usize) -> Result<NodeId> {
    if items.is_empty() {
        Ok(tape.zeros(dim))
    } else {
        Ok(attention_pool(tape, items, query)?.pooled)
    }
}

/// Attention across the three behavior channels (answer, follow, vote).
pub fn behavior_attention(tape: &mut Tape<'_>, channels: [NodeId; 3], query: NodeId) -> Result<AttentionNodes> {
    attention_pool(tape, &channels, query)
}

/// Value-level [`attention_pool`] for callers without a tape.
pub fn attention_pool_values(items: &[Vec<f64>], query: &[f64]) -> Result<AttentionResult> {
    let mut tape = Tape::new();
    let nodes: Vec<NodeId> = items
        .iter()
        .map(|v| tape.constant(Tensor::vector(v.clone())))
        .collect();
    if query.is_empty() {
        return Err(Error::invalid("empty attention query"));
    }
    let q = tape.constant(Tensor::vector(query.to_vec()));
    Ok(attention_pool(&mut tape, &nodes, q)?.values(&tape))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_item_gets_all_weight() {
        let r = attention_pool_values(&[vec![1.0, -2.0]], &[0.3, 0.3]).unwrap();
        assert_eq!(r.weights, vec![1.0]);
        assert_eq!(r.pooled, vec![1.0, -2.0]);
    }

    #[test]
    fn identical_items_share_weight() {
        let item = vec![0.5, 0.25, -1.0];
        let r = attention_pool_values(&[item.clone(), item.clone(), item.clone(), item.clone()], &[1.0, 2.0, 3.0]).unwrap();
        for w in &r.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
        for (a, b) in r.pooled.iter().zip(&item) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_channels_are_uniform() {
        let mut tape = Tape::new();
        let v = tape.constant(Tensor::vector(vec![0.2, 0.7]));
        let q = tape.constant(Tensor::vector(vec![1.0, -1.0]));
        let r = behavior_attention(&mut tape, [v, v, v], q).unwrap().values(&tape);
        for w in r.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn aligned_answer_channel_saturates() {
        // query · ans = 20, query orthogonal to fol and vot
        let mut tape = Tape::new();
        let ans = tape.constant(Tensor::vector(vec![20.0, 0.0]));
        let fol = tape.constant(Tensor::vector(vec![0.0, 3.0]));
        let vot = tape.constant(Tensor::vector(vec![0.0, -5.0]));
        let q = tape.constant(Tensor::vector(vec![1.0, 0.0]));
        let r = behavior_attention(&mut tape, [ans, fol, vot], q).unwrap().values(&tape);
        assert!(r.weights[0] > 0.999);
    }

    #[test]
    fn empty_items_error_or_zero_fallback() {
        assert!(attention_pool_values(&[], &[1.0]).is_err());
        let mut tape = Tape::new();
        let q = tape.constant(Tensor::vector(vec![1.0, 1.0]));
        let z = pool_or_zero(&mut tape, &[], q, 2).unwrap();
        assert_eq!(tape.data(z), &[0.0, 0.0]);
    }
}
