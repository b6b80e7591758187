//! Train briefly, then route a packet batch through node failures with and without interrupts.
//!
//! `cargo run --release --example interrupted_routing -- [iterations] [seed]`

use uasn_sim::marl::{train, Agents, Algorithm, RewardWeights, TrainConfig, TrainContext};
use uasn_sim::ocean::{World, WorldConfig};
use uasn_sim::routing::{run_routing_task, RoutingConfig, RoutingTask};

fn main() -> uasn_sim::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(50);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);

    let world = World::init_scenario(WorldConfig { seed, ..WorldConfig::default() })?;
    let cfg = TrainConfig { iterations, ..TrainConfig::default() };
    let (routing, rewards) = (RoutingConfig::default(), RewardWeights::default());
    let task = RoutingTask { failure_rate: 0.2, ..RoutingTask::default() };
    for algorithm in [Algorithm::MaMappo, Algorithm::MaMappoI] {
        let mut agents = Agents::new(&world, algorithm, &cfg, seed);
        train(&world, &mut agents, &TrainContext::new(cfg.clone(), routing, rewards, seed), |_| {})?;
        let m = run_routing_task(&world, &mut agents, &task, &routing, &rewards, &cfg, seed)?.metrics;
        println!(
            "{algorithm:>10}: delivered {}/{} dropped {} orphaned {} mean delay {:.2}s interrupts {} view updates {}",
            m.delivered, m.created, m.dropped, m.orphaned, m.mean_delay_s, m.interrupts, m.view_updates
        );
    }
    Ok(())
}
