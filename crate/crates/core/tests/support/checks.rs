//! Randomized oracle comparisons shared by the oracle tests and the
//! acceptance suite. Each returns the worst absolute deviation seen.

use askme::config::GroupWeighting;
use askme::encoders::{attention_pool, bilstm_encode, bilstm_last, lstm_cell, LstmNodes, LstmParams, LstmState};
use askme::model::{community_group, PersonalCache};
use askme::numcore::{NodeId, ParamSet, Tape, Tensor};
use rand::Rng;

use super::oracle;
use super::toy;

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn node(tape: &mut Tape<'_>, v: &[f64]) -> NodeId {
    tape.constant(Tensor::vector(v.to_vec()))
}

pub fn nodes(tape: &mut Tape<'_>, vs: &[Vec<f64>]) -> Vec<NodeId> {
    vs.iter().map(|v| node(tape, v)).collect()
}

fn lstm_params(rng: &mut impl Rng, prefix: &str, input: usize, hidden: usize, set: &mut ParamSet) -> oracle::Lstm {
    LstmParams::init(set, prefix, input, hidden, 0.7, rng).unwrap();
    oracle::Lstm::from_params(set, prefix)
}

pub fn lstm_cell_worst(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = toy::rng(seed);
        let (input, hidden) = (rng.random_range(1..7), rng.random_range(1..7));
        let mut set = ParamSet::new();
        let reference = lstm_params(&mut rng, "l", input, hidden, &mut set);
        let x = toy::vector(&mut rng, input, 2.0);
        let fresh = seed % 5 == 0;
        let (h, c) = if fresh {
            (vec![0.0; hidden], vec![0.0; hidden])
        } else {
            (toy::vector(&mut rng, hidden, 1.0), toy::vector(&mut rng, hidden, 3.0))
        };

        let mut tape = Tape::with_params(&set);
        let p = LstmNodes::from_params(&mut tape, "l").unwrap();
        let xn = node(&mut tape, &x);
        let prev = (!fresh).then(|| LstmState {
            h: node(&mut tape, &h),
            c: node(&mut tape, &c),
        });
        let s = lstm_cell(&mut tape, &p, xn, prev).unwrap();
        let (want_h, want_c) = reference.step(&x, &h, &c);
        worst = worst.max(max_abs(tape.data(s.h), &want_h)).max(max_abs(tape.data(s.c), &want_c));
    }
    worst
}

pub fn bilstm_encode_worst(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = toy::rng(100 + seed);
        let (input, hidden, len) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..7));
        let mut set = ParamSet::new();
        let f = lstm_params(&mut rng, "f", input, hidden, &mut set);
        let b = lstm_params(&mut rng, "b", input, hidden, &mut set);
        let seq = toy::vectors(&mut rng, len, input, 1.5);

        let mut tape = Tape::with_params(&set);
        let fp = LstmNodes::from_params(&mut tape, "f").unwrap();
        let bp = LstmNodes::from_params(&mut tape, "b").unwrap();
        let xs = nodes(&mut tape, &seq);
        let got = bilstm_encode(&mut tape, &fp, &bp, &xs).unwrap();
        let last = bilstm_last(&mut tape, &fp, &bp, &xs).unwrap();
        let want = oracle::bilstm(&f, &b, &seq);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max(max_abs(tape.data(*g), w));
        }
        worst = worst.max(max_abs(tape.data(last), want.last().unwrap()));
    }
    worst
}

pub fn attention_pool_worst(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = toy::rng(200 + seed);
        let (n, d) = (rng.random_range(1..9), rng.random_range(1..9));
        let items = toy::vectors(&mut rng, n, d, 2.0);
        let query = toy::vector(&mut rng, d, 2.0);
        let mut tape = Tape::new();
        let its = nodes(&mut tape, &items);
        let q = node(&mut tape, &query);
        let got = attention_pool(&mut tape, &its, q).unwrap().values(&tape);
        let (w, pooled) = oracle::attention(&items, &query);
        worst = worst.max(max_abs(&got.weights, &w)).max(max_abs(&got.pooled, &pooled));

        // permuting the items permutes the weights and keeps the pooled vector
        let perm: Vec<usize> = (0..n).rev().collect();
        let shuffled: Vec<NodeId> = perm.iter().map(|&i| its[i]).collect();
        let p = attention_pool(&mut tape, &shuffled, q).unwrap().values(&tape);
        for (k, &i) in perm.iter().enumerate() {
            worst = worst.max((p.weights[k] - got.weights[i]).abs());
        }
        worst = worst.max(max_abs(&p.pooled, &got.pooled));
    }
    worst
}

pub fn community_group_worst(instances: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut rng = toy::rng(400 + seed);
        let (users, d) = (rng.random_range(2..16), rng.random_range(1..7));
        let n = rng.random_range(1..8);
        let rows = toy::vectors(&mut rng, users, d, 1.0);
        let cache = PersonalCache::new(0, d, rows.clone()).unwrap();
        let me = rng.random_range(0..users);
        let personal = toy::vector(&mut rng, d, 1.0);
        for (weighting, soft) in [(GroupWeighting::Softmax, true), (GroupWeighting::Raw, false)] {
            let mut tape = Tape::new();
            let p = node(&mut tape, &personal);
            let g = community_group(&mut tape, p, &cache, Some(me), n, weighting).unwrap();
            let want = oracle::community(&personal, &rows, Some(me), n, soft);
            worst = worst.max(max_abs(tape.data(g), &want));
        }
    }
    worst
}
