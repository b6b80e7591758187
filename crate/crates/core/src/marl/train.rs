//! Rollout collection and the PPO update loop.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::agent::Agents;
use super::gae::{gae_advantages, normalize_advantages};
use super::ppo::{critic_loss, critic_target, critic_values, polyak_update, ppo_actor_loss, Transition};
use super::reward::RewardWeights;
use super::stream_rng;
use crate::error::{Error, Result};
use crate::ocean::World;
use crate::routing::{RoutingConfig, Simulation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    /// Soft target-critic update rate.
    pub polyak_tau: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
    /// Packets each source emits per training episode, one per tick.
    pub packets_per_source: usize,
    pub episode_ticks: u64,
    /// Probability that a DR node fails at some point of a training episode.
    pub failure_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 3e-3,
            gamma: 0.95,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            polyak_tau: 0.01,
            epochs: 4,
            minibatch_size: 64,
            entropy_coef: 0.01,
            actor_hidden: 64,
            critic_hidden: 64,
            packets_per_source: 6,
            episode_ticks: 40,
            failure_rate: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [0,1]")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("gae_lambda", self.gae_lambda)?;
        unit("polyak_tau", self.polyak_tau)?;
        unit("failure_rate", self.failure_rate)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.clip_epsilon.is_nan() || self.clip_epsilon <= 0.0 || self.entropy_coef < 0.0 {
            return Err(Error::Config("clip_epsilon must be positive and entropy_coef non-negative".into()));
        }
        if self.minibatch_size == 0 || self.actor_hidden == 0 || self.critic_hidden == 0 {
            return Err(Error::Config("minibatch and hidden sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a training iteration needs besides the world and the agents.
#[derive(Debug, Clone)]
pub struct TrainContext {
    pub train: TrainConfig,
    pub routing: RoutingConfig,
    pub rewards: RewardWeights,
    pub seed: u64,
    pub failure_rate: f64,
    /// Update only this region's agent (used for CA fine-tuning).
    pub only_region: Option<usize>,
}

impl TrainContext {
    pub fn new(train: TrainConfig, routing: RoutingConfig, rewards: RewardWeights, seed: u64) -> TrainContext {
        TrainContext { failure_rate: train.failure_rate, train, routing, rewards, seed, only_region: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub mean_reward: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub masked_fraction: f64,
    pub wall_ms: f64,
    pub transitions: usize,
    pub delivered: usize,
    pub mask_violations: u64,
    pub max_policy_sum_error: f64,
    /// Largest |ratio − 1| seen by the first minibatch of the first epoch.
    pub first_ratio_deviation: f64,
}

impl IterationMetrics {
    fn empty(iteration: u64) -> IterationMetrics {
        IterationMetrics {
            iteration,
            mean_reward: 0.0,
            actor_loss: 0.0,
            critic_loss: 0.0,
            masked_fraction: 0.0,
            wall_ms: 0.0,
            transitions: 0,
            delivered: 0,
            mask_violations: 0,
            max_policy_sum_error: 0.0,
            first_ratio_deviation: 0.0,
        }
    }
}

/// Collect one episode on a copy of `base` and update every region agent.
pub fn train_iteration(base: &World, agents: &mut Agents, ctx: &TrainContext, iteration: u64) -> Result<IterationMetrics> {
    let start = Instant::now();
    let t = &ctx.train;
    let mut metrics = IterationMetrics::empty(iteration);
    if t.episode_ticks == 0 || t.packets_per_source == 0 {
        return Ok(metrics);
    }
    let mut sim = Simulation::new(base.clone(), agents.algorithm, ctx.routing, ctx.rewards, ctx.seed, iteration, t.episode_ticks)?;
    sim.record_transitions = true;
    for k in 0..t.packets_per_source {
        for &source in &base.sources {
            sim.schedule_packet(k as u64, source)?;
        }
    }
    if ctx.failure_rate > 0.0 {
        let mut rng = stream_rng(ctx.seed, 1, iteration);
        let half = (t.episode_ticks / 2) as i64;
        for node in base.failure_candidates() {
            if rng.gen_bool(ctx.failure_rate) {
                let at = rng.gen_range(-half..=half).max(0) as u64;
                sim.schedule_failures(at, vec![node])?;
            }
        }
    }
    sim.run(agents)?;

    metrics.delivered = sim.counts().delivered;
    metrics.mask_violations = sim.audit.mask_violations;
    metrics.max_policy_sum_error = sim.audit.max_policy_sum_error;
    let transitions = std::mem::take(&mut sim.transitions);
    metrics.transitions = transitions.len();
    if transitions.is_empty() {
        metrics.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        return Ok(metrics);
    }
    metrics.mean_reward = transitions.iter().map(|tr| tr.reward).sum::<f64>() / transitions.len() as f64;
    let candidates: usize = transitions.iter().map(|tr| tr.mask.binary.len()).sum();
    let masked: usize = transitions.iter().map(|tr| tr.mask.masked_count()).sum();
    metrics.masked_fraction = masked as f64 / candidates as f64;

    // Online and target values of every state, each from its own region's critics.
    let n = transitions.len();
    let (mut values, mut target_values) = (vec![0.0; n], vec![0.0; n]);
    for (k, agent) in agents.regions.iter().enumerate() {
        let idx: Vec<usize> = (0..n).filter(|&i| transitions[i].agent == k).collect();
        let states: Vec<&[f64]> = idx.iter().map(|&i| transitions[i].state.as_slice()).collect();
        for ((&i, v), tv) in idx.iter().zip(critic_values(&agent.critic, &states)?).zip(critic_values(&agent.target_critic, &states)?) {
            values[i] = v;
            target_values[i] = tv;
        }
    }
    // Each packet's hops form one trajectory, terminal at its last decision.
    let mut trajectories: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, tr) in transitions.iter().enumerate() {
        trajectories.entry(tr.packet).or_default().push(i);
    }
    let mut advantages = vec![0.0; n];
    let mut targets = vec![0.0; n];
    for steps in trajectories.values() {
        let rewards: Vec<f64> = steps.iter().map(|&i| transitions[i].reward).collect();
        let vals: Vec<f64> = steps.iter().map(|&i| values[i]).collect();
        let mut dones = vec![false; steps.len()];
        *dones.last_mut().expect("non-empty") = true;
        let gae = gae_advantages(&rewards, &vals, &dones, 0.0, t.gamma, t.gae_lambda)?;
        for (pos, &i) in steps.iter().enumerate() {
            advantages[i] = gae.advantages[pos];
            let next = steps.get(pos + 1).map(|&j| target_values[j]);
            targets[i] = critic_target(rewards[pos], next, t.gamma);
        }
    }

    let mut shuffle_rng = stream_rng(ctx.seed, 4, iteration);
    let (mut actor_losses, mut critic_losses) = (Vec::new(), Vec::new());
    for (k, agent) in agents.regions.iter_mut().enumerate() {
        if ctx.only_region.is_some_and(|r| r != k) {
            continue;
        }
        let mine: Vec<usize> = (0..n).filter(|&i| transitions[i].agent == k).collect();
        if mine.is_empty() {
            continue;
        }
        let mut adv: Vec<f64> = mine.iter().map(|&i| advantages[i]).collect();
        normalize_advantages(&mut adv);

        let mut order: Vec<usize> = (0..mine.len()).collect();
        for epoch in 0..t.epochs {
            order.shuffle(&mut shuffle_rng);
            for (b, chunk) in order.chunks(t.minibatch_size).enumerate() {
                let batch: Vec<&Transition> = chunk.iter().map(|&p| &transitions[mine[p]]).collect();
                let batch_adv: Vec<f64> = chunk.iter().map(|&p| adv[p]).collect();
                let (stats, grads) = ppo_actor_loss(&agent.actor, &batch, &batch_adv, t.clip_epsilon, t.entropy_coef)?;
                if epoch == 0 && b == 0 {
                    metrics.first_ratio_deviation = metrics.first_ratio_deviation.max(stats.max_ratio_deviation);
                }
                agent.actor_opt.step(&mut agent.actor, &grads)?;
                actor_losses.push(stats.loss);

                let states: Vec<&[f64]> = batch.iter().map(|tr| tr.state.as_slice()).collect();
                let y: Vec<f64> = chunk.iter().map(|&p| targets[mine[p]]).collect();
                let (loss, grads) = critic_loss(&agent.critic, &states, &y)?;
                agent.critic_opt.step(&mut agent.critic, &grads)?;
                critic_losses.push(loss);
            }
        }
        polyak_update(&mut agent.target_critic, &agent.critic, t.polyak_tau);
    }
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    metrics.actor_loss = mean(&actor_losses);
    metrics.critic_loss = mean(&critic_losses);
    metrics.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(metrics)
}

/// Run `ctx.train.iterations` iterations, reporting each to `on_iteration`.
pub fn train(
    base: &World,
    agents: &mut Agents,
    ctx: &TrainContext,
    mut on_iteration: impl FnMut(&IterationMetrics),
) -> Result<Vec<IterationMetrics>> {
    ctx.train.validate()?;
    ctx.rewards.validate()?;
    ctx.routing.validate()?;
    let mut out = Vec::with_capacity(ctx.train.iterations);
    for it in 0..ctx.train.iterations as u64 {
        let m = train_iteration(base, agents, ctx, it)?;
        on_iteration(&m);
        out.push(m);
    }
    Ok(out)
}
