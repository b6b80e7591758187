//! Analytic gradients against central finite differences, one check per block.
//!
//! Each check returns the largest relative error it saw for one seed.

use ndarray::Array2;
use rand::Rng;
use uasn_sim::marl::{critic_loss, masked_policy, ppo_actor_loss, Actor, Transition, CANDIDATE_DIM};
use uasn_sim::mask::{ActionMask, AttentionScorer, TOKEN_DIM};
use uasn_sim::nn::{mse, softmax, softmax_backward, Dense, Mlp, MultiHeadAttention, Parameters};

use super::{numeric_gradient, numeric_gradient_vec, randomize, relative_error, rng};

pub const BLOCK_TOL: f64 = 1e-4;
pub const END_TO_END_TOL: f64 = 1e-3;
pub const SEEDS: u64 = 20;
const H: f64 = 1e-6;

pub type Check = fn(u64) -> f64;

/// Every check with its tolerance.
pub const CHECKS: [(&str, Check, f64); 8] = [
    ("dense", dense, BLOCK_TOL),
    ("mlp", mlp, BLOCK_TOL),
    ("softmax", softmax_check, BLOCK_TOL),
    ("mse", mse_check, BLOCK_TOL),
    ("attention", attention, BLOCK_TOL),
    ("scorer", scorer, BLOCK_TOL),
    ("critic", critic, BLOCK_TOL),
    ("actor_loss", actor_loss, END_TO_END_TOL),
];

/// Largest error of `check` over all seeds.
pub fn worst(check: Check) -> f64 {
    (0..SEEDS).map(check).fold(0.0, f64::max)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

fn weighted_sum(y: &Array2<f64>, w: &Array2<f64>) -> f64 {
    (y * w).sum()
}

fn flat(m: &Array2<f64>) -> Vec<f64> {
    m.iter().copied().collect()
}

pub fn dense(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (i, o, n) = (r.gen_range(1..=8), r.gen_range(1..=8), r.gen_range(1..=5));
    let layer = Dense::new(i, o, &mut r);
    let x = random_matrix(n, i, &mut r);
    let up = random_matrix(n, o, &mut r);
    let (grad, grad_x) = layer.backward(x.view(), up.view()).unwrap();
    let num = numeric_gradient(&layer, H, |l| weighted_sum(&l.forward(x.view()).unwrap(), &up));
    let num_x = numeric_gradient_vec(&flat(&x), H, |v| {
        let xv = Array2::from_shape_vec((n, i), v.to_vec()).unwrap();
        weighted_sum(&layer.forward(xv.view()).unwrap(), &up)
    });
    relative_error(&grad.flat(), &num).max(relative_error(&flat(&grad_x), &num_x))
}

pub fn mlp(seed: u64) -> f64 {
    let mut r = rng(100 + seed);
    let sizes = [r.gen_range(1..=8), r.gen_range(1..=16), r.gen_range(1..=8), 1];
    let mlp = Mlp::new(&sizes, &mut r);
    let x = random_matrix(4, sizes[0], &mut r);
    let up = random_matrix(4, 1, &mut r);
    let cache = mlp.forward_cached(x.view()).unwrap();
    let (grad, grad_x) = mlp.backward(&cache, up.view()).unwrap();
    let num = numeric_gradient(&mlp, H, |m| weighted_sum(&m.forward(x.view()).unwrap(), &up));
    let num_x = numeric_gradient_vec(&flat(&x), H, |v| {
        let xv = Array2::from_shape_vec(x.dim(), v.to_vec()).unwrap();
        weighted_sum(&mlp.forward(xv.view()).unwrap(), &up)
    });
    relative_error(&grad.flat(), &num).max(relative_error(&flat(&grad_x), &num_x))
}

pub fn softmax_check(seed: u64) -> f64 {
    let mut r = rng(200 + seed);
    let n = r.gen_range(1..=10);
    let z: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
    let up: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    let analytic = softmax_backward(&softmax(&z), &up);
    let num = numeric_gradient_vec(&z, H, |v| softmax(v).iter().zip(&up).map(|(p, u)| p * u).sum());
    relative_error(&analytic, &num)
}

pub fn mse_check(seed: u64) -> f64 {
    let mut r = rng(300 + seed);
    let n = r.gen_range(1..=10);
    let pred: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
    let target: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
    let (_, grad) = mse(&pred, &target).unwrap();
    let num = numeric_gradient_vec(&pred, H, |v| mse(v, &target).unwrap().0);
    relative_error(&grad, &num)
}

pub fn attention(seed: u64) -> f64 {
    let mut r = rng(400 + seed);
    let (d_in, heads, d_k) = (r.gen_range(2..=8), r.gen_range(1..=4), r.gen_range(1..=4));
    let (nq, nk) = (r.gen_range(1..=4), r.gen_range(1..=4));
    let att = MultiHeadAttention::new(d_in, heads, d_k, &mut r);
    let q = random_matrix(nq, d_in, &mut r);
    let k = random_matrix(nk, d_in, &mut r);
    let v = random_matrix(nk, d_in, &mut r);
    let up = random_matrix(nq, heads * d_k, &mut r);
    let cache = att.forward_cached(q.view(), k.view(), v.view()).unwrap();
    let (grad, inputs) = att.backward(&cache, up.view()).unwrap();
    let f = |a: &MultiHeadAttention| weighted_sum(&a.forward(q.view(), k.view(), v.view()).unwrap(), &up);
    let mut worst = relative_error(&grad.flat(), &numeric_gradient(&att, H, f));
    for (which, (analytic, base)) in inputs.iter().zip([&q, &k, &v]).enumerate() {
        let num = numeric_gradient_vec(&flat(base), H, |x| {
            let m = Array2::from_shape_vec(base.dim(), x.to_vec()).unwrap();
            let out = match which {
                0 => att.forward(m.view(), k.view(), v.view()),
                1 => att.forward(q.view(), m.view(), v.view()),
                _ => att.forward(q.view(), k.view(), m.view()),
            };
            weighted_sum(&out.unwrap(), &up)
        });
        worst = worst.max(relative_error(&flat(analytic), &num));
    }
    worst
}

pub fn scorer(seed: u64) -> f64 {
    let mut r = rng(500 + seed);
    let mut scorer = AttentionScorer::new(TOKEN_DIM, &mut r);
    randomize(&mut scorer, &mut r, 0.5);
    let n = r.gen_range(1..=6);
    let tokens = random_matrix(n, TOKEN_DIM, &mut r);
    let up: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    let cache = scorer.forward_cached(tokens.view()).unwrap();
    let grad = scorer.backward_scores(&cache, &up).unwrap();
    let num = numeric_gradient(&scorer, H, |s| s.scores(tokens.view()).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum());
    relative_error(&grad.flat(), &num)
}

pub fn critic(seed: u64) -> f64 {
    let mut r = rng(600 + seed);
    let critic = Mlp::new(&[9, 16, 16, 1], &mut r);
    let states: Vec<Vec<f64>> = (0..6).map(|_| (0..9).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let targets: Vec<f64> = (0..6).map(|_| r.gen_range(-1.0..1.0)).collect();
    let (_, grad) = critic_loss(&critic, &refs, &targets).unwrap();
    let num = numeric_gradient(&critic, H, |c| critic_loss(c, &refs, &targets).unwrap().0);
    relative_error(&grad.flat(), &num)
}

/// Behaviour-policy transitions over three actions, some with one action masked.
fn micro_batch(actor: &Actor, r: &mut impl Rng, count: usize) -> (Vec<Transition>, Vec<f64>) {
    let mut batch = Vec::new();
    let mut advantages = Vec::new();
    for t in 0..count {
        let candidates = random_matrix(3, CANDIDATE_DIM, r);
        let mut binary = vec![true; 3];
        if t % 3 == 1 {
            binary[r.gen_range(0..3)] = false;
        }
        let fwd = actor.forward(candidates.view()).unwrap();
        let probs = masked_policy(&fwd.logits, &binary).unwrap();
        let valid: Vec<usize> = (0..3).filter(|&k| binary[k]).collect();
        let action = valid[r.gen_range(0..valid.len())];
        // Stale behaviour log-probabilities keep ratios inside the clip band.
        let log_prob = probs[action].ln() + r.gen_range(-0.1..0.1);
        batch.push(Transition {
            agent: 0,
            node: 0,
            packet: t,
            tick: 0,
            state: vec![0.0],
            candidates,
            mask: ActionMask { scores: vec![1.0 / 3.0; 3], binary, threshold: 0.0, fallback: false },
            action,
            log_prob,
            value: 0.0,
            reward: 0.0,
            done: false,
            next_state: None,
        });
        advantages.push(r.gen_range(-1.0..1.0));
    }
    (batch, advantages)
}

/// Clipped PPO loss of two agents, one with the attention scorer.
pub fn actor_loss(seed: u64) -> f64 {
    let mut r = rng(700 + seed);
    let mut worst: f64 = 0.0;
    for with_scorer in [false, true] {
        let mut actor = Actor::new(8, with_scorer, &mut r);
        if let Some(s) = actor.scorer.as_mut() {
            randomize(s, &mut r, 0.5);
        }
        let (batch, adv) = micro_batch(&actor, &mut r, 6);
        let refs: Vec<&Transition> = batch.iter().collect();
        let (_, grad) = ppo_actor_loss(&actor, &refs, &adv, 0.2, 0.01).unwrap();
        let num = numeric_gradient(&actor, H, |a| ppo_actor_loss(a, &refs, &adv, 0.2, 0.01).unwrap().0.loss);
        worst = worst.max(relative_error(&grad.flat(), &num));
    }
    worst
}
