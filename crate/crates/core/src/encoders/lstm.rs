use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{NodeId, ParamSet, Tape, Tensor};

pub const GATE_WEIGHTS: [&str; 8] = ["w_xi", "w_hi", "w_xf", "w_hf", "w_xc", "w_hc", "w_xo", "w_ho"];
pub const GATE_BIASES: [&str; 4] = ["b_i", "b_f", "b_c", "b_o"];

/// LSTM weights as plain tensors. Input-to-hidden matrices are
/// `[hidden, input]`, hidden-to-hidden `[hidden, hidden]`, biases `[hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub weights: [Tensor; 8],
    pub biases: [Tensor; 4],
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = |i: usize| {
            if i % 2 == 0 {
                Tensor::zeros(&[hidden, input])
            } else {
                Tensor::zeros(&[hidden, hidden])
            }
        };
        Self {
            weights: std::array::from_fn(w),
            biases: std::array::from_fn(|_| Tensor::zeros(&[hidden])),
        }
    }

    /// Registers every gate tensor under `{prefix}.{name}`, drawn from N(0, std²).
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        std: f64,
        rng: &mut R,
    ) -> Result<()> {
        for (i, name) in GATE_WEIGHTS.iter().enumerate() {
            let cols = if i % 2 == 0 { input } else { hidden };
            params.insert_gaussian(format!("{prefix}.{name}"), &[hidden, cols], std, rng)?;
        }
        for name in GATE_BIASES {
            params.insert_gaussian(format!("{prefix}.{name}"), &[hidden], std, rng)?;
        }
        Ok(())
    }

    /// Places the tensors on a tape as constants.
    pub fn to_nodes(&self, tape: &mut Tape<'_>) -> LstmNodes {
        LstmNodes {
            weights: std::array::from_fn(|i| tape.constant(self.weights[i].clone())),
            biases: std::array::from_fn(|i| tape.constant(self.biases[i].clone())),
        }
    }
}

/// Gate tensors as tape nodes, in [`GATE_WEIGHTS`] / [`GATE_BIASES`] order.
#[derive(Debug, Clone, Copy)]
pub struct LstmNodes {
    pub weights: [NodeId; 8],
    pub biases: [NodeId; 4],
}

impl LstmNodes {
    /// Looks up `{prefix}.{name}` parameters bound to the tape.
    pub fn from_params(tape: &mut Tape<'_>, prefix: &str) -> Result<Self> {
        let mut weights = Vec::with_capacity(8);
        for name in GATE_WEIGHTS {
            weights.push(tape.param_named(&format!("{prefix}.{name}"))?);
        }
        let mut biases = Vec::with_capacity(4);
        for name in GATE_BIASES {
            biases.push(tape.param_named(&format!("{prefix}.{name}"))?);
        }
        Ok(Self {
            weights: weights.try_into().expect("8 weights"),
            biases: biases.try_into().expect("4 biases"),
        })
    }

    fn hidden(&self, tape: &Tape<'_>) -> usize {
        tape.shape(self.biases[0])[0]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: NodeId,
    pub c: NodeId,
}

/// One gate pre-activation `W_x e + W_h h_prev + b`; the recurrent term is
/// skipped for a zero initial state.
fn gate(tape: &mut Tape<'_>, wx: NodeId, wh: NodeId, b: NodeId, e: NodeId, h: Option<NodeId>) -> Result<NodeId> {
    let mut acc = tape.matvec(wx, e)?;
    if let Some(h) = h {
        let r = tape.matvec(wh, h)?;
        acc = tape.add(acc, r)?;
    }
    tape.add(acc, b)
}

/// One LSTM step. `prev = None` is the all-zero initial state.
///
/// ```text
/// i = σ(W_xi e + W_hi h + b_i)      f = σ(W_xf e + W_hf h + b_f)
/// c' = i ⊙ tanh(W_xc e + W_hc h + b_c) + f ⊙ c
/// o = σ(W_xo e + W_ho h + b_o)      h' = o ⊙ tanh(c')
/// ```
pub fn lstm_cell(tape: &mut Tape<'_>, p: &LstmNodes, e: NodeId, prev: Option<LstmState>) -> Result<LstmState> {
    let hidden = p.hidden(tape);
    let h_prev = prev.map(|s| s.h);
    let [wxi, whi, wxf, whf, wxc, whc, wxo, who] = p.weights;
    let [bi, bf, bc, bo] = p.biases;
    if let Some(s) = prev {
        if tape.shape(s.h) != [hidden] || tape.shape(s.c) != [hidden] {
            return Err(Error::shape("lstm_cell state", tape.shape(s.h), &[hidden]));
        }
    }

    let i_pre = gate(tape, wxi, whi, bi, e, h_prev)?;
    let i = tape.sigmoid(i_pre);
    let c_pre = gate(tape, wxc, whc, bc, e, h_prev)?;
    let cand = tape.tanh(c_pre);
    let mut c = tape.mul(i, cand)?;
    if let Some(s) = prev {
        let f_pre = gate(tape, wxf, whf, bf, e, h_prev)?;
        let f = tape.sigmoid(f_pre);
        let keep = tape.mul(f, s.c)?;
        c = tape.add(c, keep)?;
    }
    let o_pre = gate(tape, wxo, who, bo, e, h_prev)?;
    let o = tape.sigmoid(o_pre);
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok(LstmState { h, c })
}

/// Runs an LSTM over `seq`, returning the hidden state at every position.
pub fn lstm_run(tape: &mut Tape<'_>, p: &LstmNodes, seq: &[NodeId]) -> Result<Vec<LstmState>> {
    let mut state = None;
    let mut out = Vec::with_capacity(seq.len());
    for &e in seq {
        let s = lstm_cell(tape, p, e, state)?;
        out.push(s);
        state = Some(s);
    }
    Ok(out)
}

/// Bidirectional encoding fused by element-wise addition: position `i` is the
/// forward state after reading `seq[..=i]` plus the backward state after
/// reading `seq[i..]` in reverse.
pub fn bilstm_encode(tape: &mut Tape<'_>, fwd: &LstmNodes, bwd: &LstmNodes, seq: &[NodeId]) -> Result<Vec<NodeId>> {
    if seq.is_empty() {
        return Err(Error::invalid("bilstm over an empty sequence"));
    }
    let forward = lstm_run(tape, fwd, seq)?;
    let reversed: Vec<NodeId> = seq.iter().rev().copied().collect();
    let mut backward = lstm_run(tape, bwd, &reversed)?;
    backward.reverse();
    forward
        .iter()
        .zip(&backward)
        .map(|(f, b)| tape.add(f.h, b.h))
        .collect()
}

/// Only the last fused state; cheaper than [`bilstm_encode`] because the
/// backward direction needs a single step to reach the last position.
pub fn bilstm_last(tape: &mut Tape<'_>, fwd: &LstmNodes, bwd: &LstmNodes, seq: &[NodeId]) -> Result<NodeId> {
    let last = *seq
        .last()
        .ok_or_else(|| Error::invalid("bilstm over an empty sequence"))?;
    let forward = lstm_run(tape, fwd, seq)?;
    let back = lstm_cell(tape, bwd, last, None)?;
    tape.add(forward.last().expect("non-empty").h, back.h)
}
