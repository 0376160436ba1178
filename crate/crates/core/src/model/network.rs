use rand::Rng;

use super::community::{community_group, PersonalCache};
use super::variant::Variant;
use crate::config::{GroupWeighting, RunConfig};
use crate::corpus::UserContext;
use crate::encoders::embedding::{EmbeddingNodes, LEARNED_PARAM};
use crate::encoders::lstm::{lstm_run, GATE_BIASES, GATE_WEIGHTS};
use crate::encoders::{behavior_attention, bilstm_last, pool_or_zero, AttentionNodes, EmbeddingTable, LstmNodes};
use crate::error::{Error, Result};
use crate::numcore::{NodeId, ParamSet, Tape};

/// Architecture and inference-time settings stored alongside the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub fixed_dim: usize,
    pub learned_dim: usize,
    pub segment_len: usize,
    pub similar_users: usize,
    pub max_history: Option<usize>,
    pub group_weighting: GroupWeighting,
    pub lambda: f64,
}

impl ModelSpec {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            variant: cfg.variant,
            fixed_dim: cfg.fixed_dim,
            learned_dim: cfg.learned_dim,
            segment_len: cfg.segment_len,
            similar_users: cfg.similar_users,
            max_history: cfg.max_history,
            group_weighting: cfg.group_weighting,
            lambda: cfg.lambda,
        }
    }

    /// Embedding width, which is also every hidden width.
    pub fn dim(&self) -> usize {
        self.fixed_dim + self.learned_dim
    }

    /// Parameter names and shapes in initialization (and checkpoint) order.
    pub fn layout(&self, questions: usize) -> Vec<(String, Vec<usize>)> {
        let d = self.dim();
        let mut out = Vec::new();
        if self.learned_dim > 0 {
            out.push((LEARNED_PARAM.to_string(), vec![questions, self.learned_dim]));
        }
        let lstm = |prefix: &str, out: &mut Vec<(String, Vec<usize>)>| {
            for name in GATE_WEIGHTS {
                out.push((format!("{prefix}.{name}"), vec![d, d]));
            }
            for name in GATE_BIASES {
                out.push((format!("{prefix}.{name}"), vec![d]));
            }
        };
        let v = self.variant;
        if v.uses_answer_encoder() {
            lstm("ans.fwd", &mut out);
            lstm("ans.bwd", &mut out);
        }
        if v.uses_individual() {
            lstm("outer", &mut out);
            lstm("inner.fwd", &mut out);
            lstm("inner.bwd", &mut out);
        }
        if v.uses_multiview_head() {
            out.push(("head.w".into(), vec![2 * d]));
            out.push(("head.b".into(), vec![]));
        }
        if v.has_personal() {
            let (pin, vin) = if v.uses_individual() { (4 * d, 2 * d) } else { (d, d) };
            out.push(("personal.w".into(), vec![d, pin]));
            out.push(("personal.b".into(), vec![d]));
            out.push(("pred.w".into(), vec![d, vin]));
            out.push(("pred.b".into(), vec![d]));
        }
        out
    }
}

/// Weights plus the frozen embedding block they were trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub embeddings: EmbeddingTable,
    pub params: ParamSet,
}

impl Model {
    /// Every tensor drawn from N(0, std²), in [`ModelSpec::layout`] order.
    pub fn init<R: Rng + ?Sized>(spec: ModelSpec, embeddings: EmbeddingTable, std: f64, rng: &mut R) -> Result<Self> {
        check_table(&spec, &embeddings)?;
        let mut params = ParamSet::new();
        for (name, shape) in spec.layout(embeddings.questions()) {
            params.insert_gaussian(name, &shape, std, rng)?;
        }
        Ok(Self { spec, embeddings, params })
    }

    /// Wraps existing weights after checking them against the layout.
    pub fn new(spec: ModelSpec, embeddings: EmbeddingTable, params: ParamSet) -> Result<Self> {
        check_table(&spec, &embeddings)?;
        let layout = spec.layout(embeddings.questions());
        if layout.len() != params.len() {
            return Err(Error::Corrupt(format!(
                "{} expects {} tensors, found {}",
                spec.variant,
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape), (have, t)) in layout.iter().zip(params.iter()) {
            if name != have || shape.as_slice() != t.shape() {
                return Err(Error::Corrupt(format!(
                    "expected {name} {shape:?}, found {have} {:?}",
                    t.shape()
                )));
            }
        }
        Ok(Self { spec, embeddings, params })
    }

    pub fn variant(&self) -> Variant {
        self.spec.variant
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn graph(&self) -> Graph<'_> {
        Graph::new(self)
    }

    /// The candidate-independent personal vector.
    pub fn personal_vector(&self, ctx: &UserContext<'_>) -> Result<Vec<f64>> {
        let mut g = self.graph();
        let p = g.personal(ctx)?;
        Ok(g.tape.data(p).to_vec())
    }

    /// Probability that the user answers each question next.
    pub fn predict(&self, ctx: &UserContext<'_>, questions: &[usize], cache: Option<&PersonalCache>) -> Result<Vec<f64>> {
        let mut g = self.graph();
        let enc = g.encode(ctx, cache)?;
        questions
            .iter()
            .map(|&q| {
                let p = g.probability(&enc, q)?;
                Ok(g.tape.data(p)[0])
            })
            .collect()
    }

    /// Pre-sigmoid scores; ranks exactly like [`Model::predict`] without
    /// saturating to equal values.
    pub fn logits(&self, ctx: &UserContext<'_>, questions: &[usize], cache: Option<&PersonalCache>) -> Result<Vec<f64>> {
        let mut g = self.graph();
        let enc = g.encode(ctx, cache)?;
        questions
            .iter()
            .map(|&q| {
                let l = g.logit(&enc, q)?;
                Ok(g.tape.data(l)[0])
            })
            .collect()
    }

    /// Behavior-channel attention weights `[answer, follow, vote]`.
    ///
    /// Per-timestep variants yield one row per training step. Variants that
    /// attend against the candidate yield a single row for `target`. Variants
    /// without behavior attention yield nothing.
    pub fn attention_trace(&self, ctx: &UserContext<'_>, target: usize) -> Result<Vec<[f64; 3]>> {
        let mut g = self.graph();
        let rows: Vec<AttentionNodes> = if self.variant().uses_individual() {
            g.personal_parts(ctx)?.1
        } else if self.variant().uses_candidate_attention() {
            let p_ans = g.answer_encoding(ctx)?;
            let q = g.embed(target)?;
            let (f, v) = (g.embed_all(&ctx.target.follows)?, g.embed_all(&ctx.target.votes)?);
            vec![g.multiview_attention(p_ans, &f, &v, q)?]
        } else {
            Vec::new()
        };
        Ok(rows
            .iter()
            .map(|a| {
                let w = g.tape.data(a.weights);
                [w[0], w[1], w[2]]
            })
            .collect())
    }
}

fn check_table(spec: &ModelSpec, table: &EmbeddingTable) -> Result<()> {
    if table.fixed_dim() != spec.fixed_dim || table.learned_dim() != spec.learned_dim {
        return Err(Error::invalid(format!(
            "embedding table is {}+{} wide, model expects {}+{}",
            table.fixed_dim(),
            table.learned_dim(),
            spec.fixed_dim,
            spec.learned_dim
        )));
    }
    Ok(())
}

/// User-side nodes shared by every candidate.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub user: usize,
    /// Bi-LSTM summary of the answer history.
    pub p_ans: Option<NodeId>,
    pub personal: Option<NodeId>,
    pub group: Option<NodeId>,
    /// Projected user vector dotted with the candidate embedding.
    pub projected: Option<NodeId>,
    pub follows: Vec<NodeId>,
    pub votes: Vec<NodeId>,
}

/// One context's computation graph over a model's parameters.
pub struct Graph<'m> {
    pub model: &'m Model,
    pub tape: Tape<'m>,
    emb: EmbeddingNodes,
}

/// Fuses the previous outer state with the follow and vote segments that
/// precede the next answer, all attended against that answer's embedding.
/// The pooled output of the returned attention is the fused input.
pub fn askme_timestep(
    tape: &mut Tape<'_>,
    h_prev: NodeId,
    follows: &[NodeId],
    votes: &[NodeId],
    e_next: NodeId,
) -> Result<AttentionNodes> {
    let d = tape.shape(e_next)[0];
    let p_fol = pool_or_zero(tape, follows, e_next, d)?;
    let p_vot = pool_or_zero(tape, votes, e_next, d)?;
    behavior_attention(tape, [h_prev, p_fol, p_vot], e_next)
}

/// `σ(Σ_d v_d q_d)` with `v = W [personal; group] + b`.
pub fn askme_predict(tape: &mut Tape<'_>, user: NodeId, q: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
    let v = tape.affine(user, w, b)?;
    let s = tape.dot(v, q)?;
    Ok(tape.sigmoid(s))
}

impl<'m> Graph<'m> {
    pub fn new(model: &'m Model) -> Self {
        Self {
            model,
            tape: Tape::with_params(&model.params),
            emb: EmbeddingNodes::default(),
        }
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn embed(&mut self, q: usize) -> Result<NodeId> {
        self.emb.get(&self.model.embeddings, &mut self.tape, q)
    }

    pub fn embed_all(&mut self, qs: &[usize]) -> Result<Vec<NodeId>> {
        qs.iter().map(|&q| self.embed(q)).collect()
    }

    fn param(&mut self, name: &str) -> Result<NodeId> {
        self.tape.param_named(name)
    }

    fn nonempty(ctx: &UserContext<'_>) -> Result<()> {
        if ctx.answers.is_empty() {
            return Err(Error::invalid(format!("user {} has an empty answer history", ctx.user)));
        }
        Ok(())
    }

    /// Last fused Bi-LSTM state over the answer embeddings.
    pub fn answer_encoding(&mut self, ctx: &UserContext<'_>) -> Result<NodeId> {
        Self::nonempty(ctx)?;
        let seq = self.embed_all(ctx.answers)?;
        let fwd = LstmNodes::from_params(&mut self.tape, "ans.fwd")?;
        let bwd = LstmNodes::from_params(&mut self.tape, "ans.bwd")?;
        bilstm_last(&mut self.tape, &fwd, &bwd, &seq)
    }

    /// Follow and vote pooling against the candidate, then behavior attention
    /// across `[p_ans, p_fol, p_vot]`.
    pub fn multiview_attention(&mut self, p_ans: NodeId, follows: &[NodeId], votes: &[NodeId], q: NodeId) -> Result<AttentionNodes> {
        let d = self.dim();
        let p_fol = pool_or_zero(&mut self.tape, follows, q, d)?;
        let p_vot = pool_or_zero(&mut self.tape, votes, q, d)?;
        behavior_attention(&mut self.tape, [p_ans, p_fol, p_vot], q)
    }

    /// Per-step individual interaction: returns the personal vector and the
    /// behavior attention of every step.
    pub fn personal_parts(&mut self, ctx: &UserContext<'_>) -> Result<(NodeId, Vec<AttentionNodes>)> {
        Self::nonempty(ctx)?;
        let d = self.dim();
        let e = self.embed_all(ctx.answers)?;
        let outer = LstmNodes::from_params(&mut self.tape, "outer")?;
        let states = lstm_run(&mut self.tape, &outer, &e)?;
        let mut fused = Vec::with_capacity(e.len());
        let mut steps = Vec::with_capacity(e.len());
        for t in 0..e.len() {
            let h_prev = if t == 0 { self.tape.zeros(d) } else { states[t - 1].h };
            let seg = &ctx.segments[t];
            let fol = self.embed_all(&seg.follows)?;
            let vot = self.embed_all(&seg.votes)?;
            let att = askme_timestep(&mut self.tape, h_prev, &fol, &vot, e[t])?;
            fused.push(att.pooled);
            steps.push(att);
        }
        let inner_f = LstmNodes::from_params(&mut self.tape, "inner.fwd")?;
        let inner_b = LstmNodes::from_params(&mut self.tape, "inner.bwd")?;
        let h2 = bilstm_last(&mut self.tape, &inner_f, &inner_b, &fused)?;
        let h_last = states.last().expect("non-empty").h;
        // the segment before the predicted answer is attended against the
        // latest outer state, keeping the vector independent of the candidate
        let tf = self.embed_all(&ctx.target.follows)?;
        let tv = self.embed_all(&ctx.target.votes)?;
        let pf = pool_or_zero(&mut self.tape, &tf, h_last, d)?;
        let pv = pool_or_zero(&mut self.tape, &tv, h_last, d)?;
        let x = self.tape.concat(&[h2, h_last, pf, pv])?;
        let personal = self.project_personal(x)?;
        Ok((personal, steps))
    }

    fn project_personal(&mut self, x: NodeId) -> Result<NodeId> {
        let w = self.param("personal.w")?;
        let b = self.param("personal.b")?;
        let pre = self.tape.affine(x, w, b)?;
        Ok(self.tape.relu(pre))
    }

    /// The candidate-independent personal vector of the variant.
    pub fn personal(&mut self, ctx: &UserContext<'_>) -> Result<NodeId> {
        let v = self.model.variant();
        if v.uses_individual() {
            Ok(self.personal_parts(ctx)?.0)
        } else if v.uses_community() {
            let p_ans = self.answer_encoding(ctx)?;
            self.project_personal(p_ans)
        } else {
            Err(Error::invalid(format!("{v} has no personal representation")))
        }
    }

    fn group(&mut self, personal: NodeId, user: usize, cache: Option<&PersonalCache>) -> Result<NodeId> {
        let spec = &self.model.spec;
        let (n, weighting) = (spec.similar_users, spec.group_weighting);
        if n == 0 {
            return Ok(self.tape.zeros(self.dim()));
        }
        let cache = cache.ok_or_else(|| Error::invalid(format!("{} needs a personal cache", spec.variant)))?;
        community_group(&mut self.tape, personal, cache, Some(user), n, weighting)
    }

    /// Builds every user-side node for `ctx`.
    pub fn encode(&mut self, ctx: &UserContext<'_>, cache: Option<&PersonalCache>) -> Result<Encoded> {
        let v = self.model.variant();
        let mut enc = Encoded {
            user: ctx.user,
            p_ans: None,
            personal: None,
            group: None,
            projected: None,
            follows: Vec::new(),
            votes: Vec::new(),
        };
        if v.uses_answer_encoder() {
            let p_ans = self.answer_encoding(ctx)?;
            enc.p_ans = Some(p_ans);
            if v.uses_community() {
                enc.personal = Some(self.project_personal(p_ans)?);
            }
        }
        if v.uses_individual() {
            enc.personal = Some(self.personal_parts(ctx)?.0);
        }
        if v.uses_candidate_attention() {
            enc.follows = self.embed_all(&ctx.target.follows)?;
            enc.votes = self.embed_all(&ctx.target.votes)?;
        }
        if let Some(personal) = enc.personal {
            let group = if v.uses_community() {
                self.group(personal, ctx.user, cache)?
            } else {
                self.tape.zeros(self.dim())
            };
            enc.group = Some(group);
            let input = if v.uses_individual() {
                self.tape.concat(&[personal, group])?
            } else {
                group
            };
            let w = self.param("pred.w")?;
            let b = self.param("pred.b")?;
            enc.projected = Some(self.tape.affine(input, w, b)?);
        }
        Ok(enc)
    }

    /// Pre-sigmoid score of candidate `q`.
    pub fn logit(&mut self, enc: &Encoded, q: usize) -> Result<NodeId> {
        let v = self.model.variant();
        let qn = self.embed(q)?;
        let mut terms = Vec::with_capacity(2);
        if v.uses_multiview_head() {
            let p_ans = enc.p_ans.expect("answer encoder present");
            let p_u = if v.uses_candidate_attention() {
                self.multiview_attention(p_ans, &enc.follows, &enc.votes, qn)?.pooled
            } else {
                p_ans
            };
            let x = self.tape.concat(&[p_u, qn])?;
            let w = self.param("head.w")?;
            let b = self.param("head.b")?;
            let s = self.tape.dot(w, x)?;
            terms.push(self.tape.add(s, b)?);
        }
        if let Some(projected) = enc.projected {
            terms.push(self.tape.dot(projected, qn)?);
        }
        self.tape.add_all(&terms)
    }

    pub fn probability(&mut self, enc: &Encoded, q: usize) -> Result<NodeId> {
        let l = self.logit(enc, q)?;
        Ok(self.tape.sigmoid(l))
    }
}
