use std::collections::HashMap;

use rand::Rng;

use crate::corpus::embfile::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numcore::{NodeId, ParamSet, Tape, Tensor};

pub const LEARNED_PARAM: &str = "emb.learned";

/// Question embeddings: a frozen block (pretrained or generated text vectors)
/// concatenated with a trainable block stored in the [`ParamSet`] under
/// [`LEARNED_PARAM`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    questions: usize,
    fixed_dim: usize,
    learned_dim: usize,
    fixed: Vec<f64>,
}

impl EmbeddingTable {
    /// `fixed` must have `questions` rows and `fixed_dim` columns; `None` means zeros.
    pub fn new(
        questions: usize,
        fixed_dim: usize,
        learned_dim: usize,
        fixed: Option<&EmbeddingMatrix>,
    ) -> Result<Self> {
        if fixed_dim + learned_dim == 0 || questions == 0 {
            return Err(Error::invalid("embedding table needs questions and a positive width"));
        }
        let fixed = match fixed {
            Some(m) => {
                if m.rows != questions || m.cols != fixed_dim {
                    return Err(Error::invalid(format!(
                        "frozen embeddings are {}x{}, expected {questions}x{fixed_dim}",
                        m.rows, m.cols
                    )));
                }
                m.data.iter().map(|&v| f64::from(v)).collect()
            }
            None => vec![0.0; questions * fixed_dim],
        };
        Ok(Self {
            questions,
            fixed_dim,
            learned_dim,
            fixed,
        })
    }

    pub fn from_tensor(fixed: &Tensor, learned_dim: usize) -> Result<Self> {
        if fixed.rank() != 2 {
            return Err(Error::invalid("frozen embeddings must be a matrix"));
        }
        Ok(Self {
            questions: fixed.rows(),
            fixed_dim: fixed.cols(),
            learned_dim,
            fixed: fixed.data().to_vec(),
        })
    }

    pub fn questions(&self) -> usize {
        self.questions
    }

    pub fn fixed_dim(&self) -> usize {
        self.fixed_dim
    }

    pub fn learned_dim(&self) -> usize {
        self.learned_dim
    }

    pub fn dim(&self) -> usize {
        self.fixed_dim + self.learned_dim
    }

    pub fn fixed_row(&self, q: usize) -> &[f64] {
        &self.fixed[q * self.fixed_dim..(q + 1) * self.fixed_dim]
    }

    /// Registers the trainable block, drawn from N(0, std²).
    pub fn init_learned<R: Rng + ?Sized>(&self, params: &mut ParamSet, std: f64, rng: &mut R) -> Result<()> {
        if self.learned_dim > 0 {
            params.insert_gaussian(LEARNED_PARAM, &[self.questions, self.learned_dim], std, rng)?;
        }
        Ok(())
    }

    /// Full embedding of question `q` as plain values.
    pub fn lookup(&self, params: &ParamSet, q: usize) -> Result<Vec<f64>> {
        self.check(q)?;
        let mut out = self.fixed_row(q).to_vec();
        if self.learned_dim > 0 {
            let learned = params
                .by_name(LEARNED_PARAM)
                .ok_or_else(|| Error::invalid("missing learned embeddings"))?;
            out.extend_from_slice(learned.row(q));
        }
        Ok(out)
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.questions {
            return Err(Error::invalid(format!(
                "question index {q} out of range ({} questions)",
                self.questions
            )));
        }
        Ok(())
    }
}

/// Per-tape memo of embedding nodes so every question maps to one node.
#[derive(Default)]
pub struct EmbeddingNodes {
    memo: HashMap<usize, NodeId>,
}

impl EmbeddingNodes {
    pub fn get(&mut self, table: &EmbeddingTable, tape: &mut Tape<'_>, q: usize) -> Result<NodeId> {
        if let Some(&n) = self.memo.get(&q) {
            return Ok(n);
        }
        table.check(q)?;
        let node = match (table.fixed_dim, table.learned_dim) {
            (_, 0) => tape.constant(Tensor::vector(table.fixed_row(q).to_vec())),
            (0, _) => tape.param_row(tape_learned(tape)?, q)?,
            _ => {
                let fixed = tape.constant(Tensor::vector(table.fixed_row(q).to_vec()));
                let learned = tape.param_row(tape_learned(tape)?, q)?;
                tape.concat(&[fixed, learned])?
            }
        };
        self.memo.insert(q, node);
        Ok(node)
    }
}

fn tape_learned(tape: &Tape<'_>) -> Result<crate::numcore::ParamId> {
    tape.param_id(LEARNED_PARAM)
}
