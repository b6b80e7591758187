use super::policy::Actor;
use super::train::TrainConfig;
use super::{stream_rng, Algorithm};
use crate::error::Result;
use crate::nn::{prefixed, Adam, AdamConfig, Checkpoint, Mlp, Parameters, Tensor};
use crate::ocean::{NodeId, World};

/// Node-local critic features: noise, energy, hop fraction, distance to sink, candidate count.
pub const LOCAL_OBS_DIM: usize = 5;
/// Per-region summary features: alive fraction, mean energy, packet load, view staleness.
pub const REGION_OBS_DIM: usize = 4;

pub fn critic_obs_dim(region_count: usize) -> usize {
    LOCAL_OBS_DIM + REGION_OBS_DIM * region_count
}

/// Actor and centralized critic owned by one CA.
#[derive(Debug, Clone)]
pub struct RegionAgent {
    pub ca: NodeId,
    pub actor: Actor,
    pub critic: Mlp,
    pub target_critic: Mlp,
    pub(crate) actor_opt: Adam,
    pub(crate) critic_opt: Adam,
}

#[derive(Debug, Clone)]
pub struct Agents {
    pub algorithm: Algorithm,
    pub regions: Vec<RegionAgent>,
}

impl Agents {
    pub fn new(world: &World, algorithm: Algorithm, train: &TrainConfig, seed: u64) -> Agents {
        let obs = critic_obs_dim(world.subnets.len());
        let adam = AdamConfig { lr: train.learning_rate, ..AdamConfig::default() };
        let regions = world
            .subnets
            .iter()
            .enumerate()
            .map(|(k, subnet)| {
                let mut rng = stream_rng(seed, 5, k as u64);
                let actor = Actor::new(train.actor_hidden, algorithm.uses_mask(), &mut rng);
                let critic = Mlp::new(&[obs, train.critic_hidden, train.critic_hidden, 1], &mut rng);
                RegionAgent {
                    ca: subnet.ca,
                    actor_opt: Adam::new(adam, actor.param_count()),
                    critic_opt: Adam::new(adam, critic.param_count()),
                    target_critic: critic.clone(),
                    actor,
                    critic,
                }
            })
            .collect();
        Agents { algorithm, regions }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(self)
    }

    pub fn restore(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        checkpoint.restore(self)
    }
}

impl Parameters for Agents {
    fn tensors(&self) -> Vec<Tensor<'_>> {
        self.regions
            .iter()
            .enumerate()
            .flat_map(|(k, r)| {
                let mut out = prefixed(&format!("region{k}.actor"), r.actor.tensors());
                out.extend(prefixed(&format!("region{k}.critic"), r.critic.tensors()));
                out.extend(prefixed(&format!("region{k}.target_critic"), r.target_critic.tensors()));
                out
            })
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.regions
            .iter_mut()
            .flat_map(|r| {
                let mut out = r.actor.tensors_mut();
                out.extend(r.critic.tensors_mut());
                out.extend(r.target_critic.tensors_mut());
                out
            })
            .collect()
    }
}
