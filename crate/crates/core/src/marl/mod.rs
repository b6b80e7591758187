//! Multi-agent PPO: one actor-critic pair per CA region, trained centrally.

mod agent;
mod gae;
mod policy;
mod ppo;
mod reward;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use agent::{critic_obs_dim, Agents, RegionAgent, LOCAL_OBS_DIM, REGION_OBS_DIM};
pub use gae::{gae_advantages, normalize_advantages, GaeOutput};
pub use policy::{masked_policy, sample_index, Actor, ActorForward, CANDIDATE_DIM};
pub use ppo::{
    clipped_objective, critic_loss, critic_target, critic_values, polyak_update, ppo_actor_loss, stack_states,
    PpoStats, Transition,
};
pub use reward::{
    delay_reward, forwarding_reward, hop_reward, noise_reward, total_reward, HopOutcome, RewardComponents,
    RewardWeights,
};
pub use train::{train, train_iteration, IterationMetrics, TrainConfig, TrainContext};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Plain MAPPO over the raw adjacency table.
    Mappo,
    /// MAPPO with the attention action mask and CA network views.
    MaMappo,
    /// The masked variant plus interrupt-driven view updates.
    MaMappoI,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Mappo, Algorithm::MaMappo, Algorithm::MaMappoI];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mappo => "mappo",
            Algorithm::MaMappo => "ma_mappo",
            Algorithm::MaMappoI => "ma_mappo_i",
        }
    }

    pub fn uses_mask(self) -> bool {
        self != Algorithm::Mappo
    }

    pub fn interrupts(self) -> bool {
        self == Algorithm::MaMappoI
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}; expected mappo, ma_mappo or ma_mappo_i")))
    }
}

/// Independent random stream `(purpose, index)` derived from `seed`.
pub fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 40) ^ index);
    rng
}
