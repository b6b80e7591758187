//! PPO-clip actor objective, critic targets and critic regression.

use ndarray::Array2;

use super::policy::{masked_policy, Actor};
use crate::error::{Error, Result};
use crate::mask::ActionMask;
use crate::nn::{mse, Mlp, Parameters};
use crate::ocean::NodeId;

/// One routing decision as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Index of the region agent that decided.
    pub agent: usize,
    pub node: NodeId,
    pub packet: usize,
    pub tick: u64,
    /// Critic observation.
    pub state: Vec<f64>,
    /// Candidate features, one row per action.
    pub candidates: Array2<f64>,
    pub mask: ActionMask,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
    pub next_state: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoStats {
    pub loss: f64,
    pub mean_ratio: f64,
    /// Largest |ratio − 1| in the batch.
    pub max_ratio_deviation: f64,
    pub clipped_fraction: f64,
    pub entropy: f64,
}

/// Per-transition clipped surrogate `min(ρ·Â, clip(ρ, 1±ε)·Â)`.
pub fn clipped_objective(ratio: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantage)
}

/// Mean negative clipped surrogate minus an entropy bonus, with gradients.
///
/// Masks are taken from the transitions, so masked logits receive no gradient.
pub fn ppo_actor_loss(
    actor: &Actor,
    batch: &[&Transition],
    advantages: &[f64],
    clip_epsilon: f64,
    entropy_coef: f64,
) -> Result<(PpoStats, Actor)> {
    if batch.len() != advantages.len() || batch.is_empty() {
        return Err(Error::Shape(format!("{} transitions vs {} advantages", batch.len(), advantages.len())));
    }
    let n = batch.len() as f64;
    let mut grads = actor.zeros_like();
    let mut stats = PpoStats::default();
    for (tr, &adv) in batch.iter().zip(advantages) {
        let fwd = actor.forward(tr.candidates.view())?;
        let probs = masked_policy(&fwd.logits, &tr.mask.binary)?;
        let p_a = probs[tr.action];
        if p_a <= 0.0 {
            return Err(Error::State(format!("action {} has zero probability under its mask", tr.action)));
        }
        let ratio = (p_a.ln() - tr.log_prob).exp();
        let objective = clipped_objective(ratio, adv, clip_epsilon);
        let entropy: f64 = -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
        let loss = -objective - entropy_coef * entropy;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("actor loss {loss} (ratio {ratio}, advantage {adv})")));
        }
        stats.loss += loss / n;
        stats.mean_ratio += ratio / n;
        stats.entropy += entropy / n;
        stats.max_ratio_deviation = stats.max_ratio_deviation.max((ratio - 1.0).abs());

        // The unclipped branch is the active one when it is not larger.
        let unclipped = ratio * adv <= ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon) * adv;
        if !unclipped {
            stats.clipped_fraction += 1.0 / n;
        }
        let d_logp = if unclipped { -ratio * adv } else { 0.0 };
        let d_logits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                if !tr.mask.binary[k] {
                    return 0.0;
                }
                let indicator = if k == tr.action { 1.0 } else { 0.0 };
                let surrogate = d_logp * (indicator - p);
                let bonus = if p > 0.0 { entropy_coef * p * (p.ln() + entropy) } else { 0.0 };
                (surrogate + bonus) / n
            })
            .collect();
        grads.add_scaled(&actor.backward(&fwd, &d_logits)?, 1.0);
    }
    Ok((stats, grads))
}

/// One-step bootstrap `r + γ·V_target(s′)`; terminal steps bootstrap 0.
pub fn critic_target(reward: f64, next_value: Option<f64>, gamma: f64) -> f64 {
    reward + next_value.map_or(0.0, |v| gamma * v)
}

pub fn stack_states(states: &[&[f64]]) -> Result<Array2<f64>> {
    let width = states.first().map_or(0, |s| s.len());
    let flat: Vec<f64> = states.iter().flat_map(|s| s.iter().copied()).collect();
    Array2::from_shape_vec((states.len(), width), flat).map_err(|e| Error::Shape(e.to_string()))
}

pub fn critic_values(critic: &Mlp, states: &[&[f64]]) -> Result<Vec<f64>> {
    if states.is_empty() {
        return Ok(Vec::new());
    }
    Ok(critic.forward(stack_states(states)?.view())?.column(0).to_vec())
}

/// Mean squared error of the critic against fixed targets, with gradients.
pub fn critic_loss(critic: &Mlp, states: &[&[f64]], targets: &[f64]) -> Result<(f64, Mlp)> {
    let x = stack_states(states)?;
    let cache = critic.forward_cached(x.view())?;
    let pred = cache.output.column(0).to_vec();
    let (loss, grad) = mse(&pred, targets)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("critic loss {loss}")));
    }
    let upstream = Array2::from_shape_vec((grad.len(), 1), grad).map_err(|e| Error::Shape(e.to_string()))?;
    let (grads, _) = critic.backward(&cache, upstream.view())?;
    Ok((loss, grads))
}

/// `target ← (1 − τ)·target + τ·online`.
pub fn polyak_update<P: Parameters>(target: &mut P, online: &P, tau: f64) {
    target.scale(1.0 - tau);
    target.add_scaled(online, tau);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marl::policy::CANDIDATE_DIM;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn transition(actor: &Actor, rng: &mut ChaCha8Rng, mask: Vec<bool>) -> Transition {
        let n = mask.len();
        let candidates = Array2::from_shape_fn((n, CANDIDATE_DIM), |_| rng.gen_range(-1.0..1.0));
        let fwd = actor.forward(candidates.view()).unwrap();
        let probs = masked_policy(&fwd.logits, &mask).unwrap();
        let action = mask.iter().position(|&m| m).unwrap();
        Transition {
            agent: 0,
            node: 0,
            packet: 0,
            tick: 0,
            state: vec![0.0; 3],
            candidates,
            mask: ActionMask { scores: vec![1.0 / n as f64; n], binary: mask, threshold: 0.0, fallback: false },
            action,
            log_prob: probs[action].ln(),
            value: 0.0,
            reward: 0.0,
            done: false,
            next_state: None,
        }
    }

    #[test]
    fn clip_rule() {
        assert_abs_diff_eq!(clipped_objective(1.5, 2.0, 0.2), 1.2 * 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(clipped_objective(0.5, -1.0, 0.2), -0.8, epsilon = 1e-15);
        assert_eq!(clipped_objective(1.0, 3.0, 0.2), 3.0);
    }

    #[test]
    fn same_policy_gives_unit_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let actor = Actor::new(8, true, &mut rng);
        let trs: Vec<_> = (0..5).map(|_| transition(&actor, &mut rng, vec![true, false, true])).collect();
        let batch: Vec<&Transition> = trs.iter().collect();
        let adv = [0.5, -1.0, 2.0, 0.1, -0.3];
        let (stats, _) = ppo_actor_loss(&actor, &batch, &adv, 0.2, 0.0).unwrap();
        assert!(stats.max_ratio_deviation < 1e-12);
        assert_abs_diff_eq!(stats.loss, -adv.iter().sum::<f64>() / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_advantage_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let actor = Actor::new(8, true, &mut rng);
        let trs: Vec<_> = (0..3).map(|_| transition(&actor, &mut rng, vec![true; 4])).collect();
        let batch: Vec<&Transition> = trs.iter().collect();
        let (_, g) = ppo_actor_loss(&actor, &batch, &[0.0; 3], 0.2, 0.0).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masked_logits_get_no_body_gradient_from_their_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let actor = Actor::new(8, false, &mut rng);
        let mut tr = transition(&actor, &mut rng, vec![true, false]);
        let base = ppo_actor_loss(&actor, &[&tr], &[1.0], 0.2, 0.01).unwrap();
        // Changing the masked candidate's features leaves loss and gradients untouched.
        tr.candidates.row_mut(1).fill(5.0);
        let moved = ppo_actor_loss(&actor, &[&tr], &[1.0], 0.2, 0.01).unwrap();
        assert_eq!(base.0.loss, moved.0.loss);
        assert_eq!(base.1, moved.1);
    }

    #[test]
    fn critic_target_examples() {
        assert_eq!(critic_target(1.0, None, 0.95), 1.0);
        assert_eq!(critic_target(0.7, Some(3.0), 0.0), 0.7);
        assert_abs_diff_eq!(critic_target(0.5, Some(2.0), 0.95), 2.4, epsilon = 1e-15);
    }

    #[test]
    fn critic_loss_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let critic = Mlp::new(&[3, 8, 1], &mut rng);
        let states: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let pred = critic_values(&critic, &refs).unwrap();
        let (loss, g) = critic_loss(&critic, &refs, &pred).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flat().iter().all(|&v| v == 0.0));
        let shifted: Vec<f64> = pred.iter().map(|p| p - 0.3).collect();
        assert_abs_diff_eq!(critic_loss(&critic, &refs, &shifted).unwrap().0, 0.09, epsilon = 1e-12);
        let targets: Vec<f64> = (0..6).map(|k| k as f64 * 0.1).collect();
        let direct = pred.iter().zip(&targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / 6.0;
        assert_abs_diff_eq!(critic_loss(&critic, &refs, &targets).unwrap().0, direct, epsilon = 1e-12);
    }

    #[test]
    fn polyak_moves_a_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let online = Mlp::new(&[2, 3, 1], &mut rng);
        let mut target = online.zeros_like();
        polyak_update(&mut target, &online, 0.01);
        for (t, o) in target.flat().iter().zip(online.flat()) {
            assert_abs_diff_eq!(*t, 0.01 * o, epsilon = 1e-15);
        }
    }
}
