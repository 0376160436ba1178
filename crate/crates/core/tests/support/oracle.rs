//! Independent plain-value transcriptions of the encoders and model pieces.
//!
//! Dot products and sums are evaluated in double-double (error-free
//! transformations), so the references carry roughly twice the working
//! precision of the tape.

#![allow(dead_code)]

use askme::config::GroupWeighting;
use askme::model::{Model, Variant};
use askme::numcore::{ParamSet, Tensor};

/// Error-free `a + b = s + e`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

pub fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for x in xs {
        let (t, e) = two_sum(s, x);
        s = t;
        c += e;
    }
    s + c
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "oracle dot length");
    let (mut s, mut c) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let (t, e) = two_sum(s, p);
        s = t;
        c += e + pe;
    }
    s + c
}

pub fn matvec(w: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    w.iter().map(|row| dot(row, x)).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s = sum(e.iter().copied());
    e.iter().map(|v| v / s).collect()
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    assert_eq!(t.rank(), 2);
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

pub fn param_rows(p: &ParamSet, name: &str) -> Vec<Vec<f64>> {
    rows(p.by_name(name).unwrap_or_else(|| panic!("missing {name}")))
}

pub fn param_vec(p: &ParamSet, name: &str) -> Vec<f64> {
    p.by_name(name).unwrap_or_else(|| panic!("missing {name}")).data().to_vec()
}

/// Weighted sum of `items`.
pub fn combine(weights: &[f64], items: &[Vec<f64>]) -> Vec<f64> {
    let d = items[0].len();
    (0..d)
        .map(|j| sum(weights.iter().zip(items).map(|(w, it)| w * it[j])))
        .collect()
}

#[derive(Clone)]
pub struct Lstm {
    pub wxi: Vec<Vec<f64>>,
    pub whi: Vec<Vec<f64>>,
    pub wxf: Vec<Vec<f64>>,
    pub whf: Vec<Vec<f64>>,
    pub wxc: Vec<Vec<f64>>,
    pub whc: Vec<Vec<f64>>,
    pub wxo: Vec<Vec<f64>>,
    pub who: Vec<Vec<f64>>,
    pub bi: Vec<f64>,
    pub bf: Vec<f64>,
    pub bc: Vec<f64>,
    pub bo: Vec<f64>,
}

impl Lstm {
    pub fn from_params(p: &ParamSet, prefix: &str) -> Self {
        let w = |n: &str| param_rows(p, &format!("{prefix}.{n}"));
        let b = |n: &str| param_vec(p, &format!("{prefix}.{n}"));
        Self {
            wxi: w("w_xi"),
            whi: w("w_hi"),
            wxf: w("w_xf"),
            whf: w("w_hf"),
            wxc: w("w_xc"),
            whc: w("w_hc"),
            wxo: w("w_xo"),
            who: w("w_ho"),
            bi: b("b_i"),
            bf: b("b_f"),
            bc: b("b_c"),
            bo: b("b_o"),
        }
    }

    pub fn hidden(&self) -> usize {
        self.bi.len()
    }

    fn pre(wx: &[Vec<f64>], wh: &[Vec<f64>], b: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
        (0..b.len())
            .map(|r| {
                // one compensated sum over [W_x | W_h | b] · [x | h | 1]
                let row: Vec<f64> = [wx[r].as_slice(), wh[r].as_slice(), &[b[r]]].concat();
                let inp: Vec<f64> = [x, h, &[1.0]].concat();
                dot(&row, &inp)
            })
            .collect()
    }

    /// One step from `(h, c)`; returns `(h', c')`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let i: Vec<f64> = Self::pre(&self.wxi, &self.whi, &self.bi, x, h).into_iter().map(sigmoid).collect();
        let f: Vec<f64> = Self::pre(&self.wxf, &self.whf, &self.bf, x, h).into_iter().map(sigmoid).collect();
        let g: Vec<f64> = Self::pre(&self.wxc, &self.whc, &self.bc, x, h).into_iter().map(f64::tanh).collect();
        let o: Vec<f64> = Self::pre(&self.wxo, &self.who, &self.bo, x, h).into_iter().map(sigmoid).collect();
        let c2: Vec<f64> = (0..c.len()).map(|k| i[k] * g[k] + f[k] * c[k]).collect();
        let h2: Vec<f64> = (0..c.len()).map(|k| o[k] * c2[k].tanh()).collect();
        (h2, c2)
    }

    /// Hidden states over `seq` from the zero state.
    pub fn run(&self, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let d = self.hidden();
        let (mut h, mut c) = (vec![0.0; d], vec![0.0; d]);
        let mut out = Vec::new();
        for x in seq {
            let (h2, c2) = self.step(x, &h, &c);
            out.push(h2.clone());
            h = h2;
            c = c2;
        }
        out
    }
}

/// Two independent LSTMs, the backward one over the reversed sequence, summed.
pub fn bilstm(fwd: &Lstm, bwd: &Lstm, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let f = fwd.run(seq);
    let rev: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
    let mut b = bwd.run(&rev);
    b.reverse();
    f.iter().zip(&b).map(|(x, y)| add(x, y)).collect()
}

/// `(weights, pooled)` of dot-product attention.
pub fn attention(items: &[Vec<f64>], query: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let logits: Vec<f64> = items.iter().map(|it| dot(it, query)).collect();
    let w = softmax(&logits);
    let pooled = combine(&w, items);
    (w, pooled)
}

pub fn pool_or_zero(items: &[Vec<f64>], query: &[f64]) -> Vec<f64> {
    if items.is_empty() {
        vec![0.0; query.len()]
    } else {
        attention(items, query).1
    }
}

/// Brute force: score everyone but `exclude`, sort, keep `n`, softmax, pool.
pub fn community(personal: &[f64], others: &[Vec<f64>], exclude: Option<usize>, n: usize, softmax_weights: bool) -> Vec<f64> {
    let mut all: Vec<(f64, usize)> = others
        .iter()
        .enumerate()
        .filter(|(l, _)| Some(*l) != exclude)
        .map(|(l, v)| (dot(personal, v), l))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    all.truncate(n);
    if all.is_empty() {
        return vec![0.0; personal.len()];
    }
    let sims: Vec<f64> = all.iter().map(|s| s.0).collect();
    let w = if softmax_weights { softmax(&sims) } else { sims };
    let chosen: Vec<Vec<f64>> = all.iter().map(|s| others[s.1].clone()).collect();
    combine(&w, &chosen)
}

/// Fused input of one individual-interaction step, with its channel weights.
pub fn timestep(h_prev: &[f64], follows: &[Vec<f64>], votes: &[Vec<f64>], e_next: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pf = pool_or_zero(follows, e_next);
    let pv = pool_or_zero(votes, e_next);
    attention(&[h_prev.to_vec(), pf, pv], e_next)
}

pub fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

pub fn affine(w: &[Vec<f64>], x: &[f64], b: &[f64]) -> Vec<f64> {
    add(&matvec(w, x), b)
}

/// Embedding rows of every question: frozen columns then learned columns.
pub struct Embeddings(pub Vec<Vec<f64>>);

impl Embeddings {
    pub fn of(model: &Model) -> Self {
        let t = &model.embeddings;
        let learned = model.params.by_name("emb.learned").map(rows);
        Self(
            (0..t.questions())
                .map(|q| {
                    let mut r = t.fixed_row(q).to_vec();
                    if let Some(l) = &learned {
                        r.extend_from_slice(&l[q]);
                    }
                    r
                })
                .collect(),
        )
    }

    pub fn get(&self, qs: &[usize]) -> Vec<Vec<f64>> {
        qs.iter().map(|&q| self.0[q].clone()).collect()
    }
}

/// Plain history: answers, per-answer segments, target segment.
pub struct History {
    pub answers: Vec<usize>,
    pub segments: Vec<(Vec<usize>, Vec<usize>)>,
    pub target: (Vec<usize>, Vec<usize>),
}

/// Individual-level personal vector: outer LSTM, fused steps, inner Bi-LSTM,
/// target segment attended by the last outer state, ReLU projection.
pub fn askme_personal(p: &ParamSet, emb: &Embeddings, h: &History) -> Vec<f64> {
    let outer = Lstm::from_params(p, "outer");
    let e = emb.get(&h.answers);
    let d = e[0].len();
    let states = outer.run(&e);
    let mut fused = Vec::new();
    for t in 0..e.len() {
        let h_prev = if t == 0 { vec![0.0; d] } else { states[t - 1].clone() };
        let (fol, vot) = &h.segments[t];
        fused.push(timestep(&h_prev, &emb.get(fol), &emb.get(vot), &e[t]).1);
    }
    let inner = bilstm(&Lstm::from_params(p, "inner.fwd"), &Lstm::from_params(p, "inner.bwd"), &fused);
    let h2 = inner.last().unwrap().clone();
    let h_t = states.last().unwrap().clone();
    let pf = pool_or_zero(&emb.get(&h.target.0), &h_t);
    let pv = pool_or_zero(&emb.get(&h.target.1), &h_t);
    let x: Vec<f64> = [h2, h_t, pf, pv].concat();
    relu(affine(&param_rows(p, "personal.w"), &x, &param_vec(p, "personal.b")))
}

/// Last fused state of the answer Bi-LSTM.
pub fn answer_encoding(p: &ParamSet, emb: &Embeddings, answers: &[usize]) -> Vec<f64> {
    let enc = bilstm(&Lstm::from_params(p, "ans.fwd"), &Lstm::from_params(p, "ans.bwd"), &emb.get(answers));
    enc.last().unwrap().clone()
}

/// `σ(Σ_d v_d q_d)` with `v = W [personal; group] + b`.
pub fn askme_predict(personal: &[f64], group: &[f64], q: &[f64], w: &[Vec<f64>], b: &[f64]) -> f64 {
    let x: Vec<f64> = [personal, group].concat();
    sigmoid(dot(&affine(w, &x, b), q))
}

/// Multi-view head logit `wᵀ[p_u; q] + b`, where `p_u` is behavior attention
/// over the answer encoding and the candidate-attended follows and votes, or
/// the answer encoding itself when `attend` is off.
pub fn head_logit(p_ans: &[f64], follows: &[Vec<f64>], votes: &[Vec<f64>], q: &[f64], w: &[f64], b: f64, attend: bool) -> f64 {
    let p_u = if attend {
        let pf = pool_or_zero(follows, q);
        let pv = pool_or_zero(votes, q);
        attention(&[p_ans.to_vec(), pf, pv], q).1
    } else {
        p_ans.to_vec()
    };
    let x: Vec<f64> = [p_u.as_slice(), q].concat();
    sum([dot(w, &x), b])
}

/// Pre-sigmoid score of question `q` for every variant, composed by hand.
/// `others` holds every user's cached personal vector; `user` is excluded.
pub fn model_logit(model: &Model, h: &History, user: usize, others: &[Vec<f64>], q: usize) -> f64 {
    let p = &model.params;
    let emb = Embeddings::of(model);
    let qv = emb.0[q].clone();
    let spec = &model.spec;
    let softmax_weights = spec.group_weighting == GroupWeighting::Softmax;
    let group = |personal: &[f64]| {
        if spec.similar_users == 0 {
            vec![0.0; personal.len()]
        } else {
            community(personal, others, Some(user), spec.similar_users, softmax_weights)
        }
    };
    let head = |attend: bool| {
        let p_ans = answer_encoding(p, &emb, &h.answers);
        let w = param_vec(p, "head.w");
        let b = param_vec(p, "head.b")[0];
        head_logit(&p_ans, &emb.get(&h.target.0), &emb.get(&h.target.1), &qv, &w, b, attend)
    };
    let projected = |x: &[f64]| dot(&affine(&param_rows(p, "pred.w"), x, &param_vec(p, "pred.b")), &qv);
    let community_term = || {
        let p_ans = answer_encoding(p, &emb, &h.answers);
        let personal = relu(affine(&param_rows(p, "personal.w"), &p_ans, &param_vec(p, "personal.b")));
        projected(&group(&personal))
    };
    match spec.variant {
        Variant::MultiView | Variant::AskMeM => head(true),
        Variant::AskMeA => head(false),
        Variant::AskMeP => community_term(),
        Variant::AskMeMP => sum([head(true), community_term()]),
        Variant::AskMeB => {
            let personal = askme_personal(p, &emb, h);
            let zero = vec![0.0; personal.len()];
            projected(&[personal, zero].concat())
        }
        Variant::AskMe => {
            let personal = askme_personal(p, &emb, h);
            let g = group(&personal);
            projected(&[personal, g].concat())
        }
    }
}
