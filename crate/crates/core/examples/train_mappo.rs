//! Train each algorithm on the 64-node scenario and print its reward curve by decile.
//!
//! `cargo run --release --example train_mappo -- [iterations] [seed]`

use uasn_sim::harness::decile_means;
use uasn_sim::marl::{train, Agents, Algorithm, TrainConfig, TrainContext};
use uasn_sim::ocean::{World, WorldConfig};
use uasn_sim::routing::RoutingConfig;
use uasn_sim::marl::RewardWeights;

fn main() -> uasn_sim::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    let world = World::init_scenario(WorldConfig { seed, ..WorldConfig::default() })?;
    let cfg = TrainConfig { iterations, ..TrainConfig::default() };
    for algorithm in Algorithm::ALL {
        let mut agents = Agents::new(&world, algorithm, &cfg, seed);
        let ctx = TrainContext::new(cfg.clone(), RoutingConfig::default(), RewardWeights::default(), seed);
        let started = std::time::Instant::now();
        let curve = train(&world, &mut agents, &ctx, |_| {})?;
        let rewards: Vec<f64> = curve.iter().map(|m| m.mean_reward).collect();
        let (first, last) = decile_means(&rewards);
        let delivered: usize = curve.iter().map(|m| m.delivered).sum();
        let masked = curve.iter().map(|m| m.masked_fraction).sum::<f64>() / curve.len() as f64;
        println!(
            "{algorithm:>10}: first decile {first:.4}  final decile {last:.4}  delivered/iter {:.2}  masked {masked:.3}  {:.1} ms/iter",
            delivered as f64 / curve.len() as f64,
            started.elapsed().as_secs_f64() * 1e3 / curve.len() as f64
        );
    }
    Ok(())
}
