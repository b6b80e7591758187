//! Build a scenario, write it as JSON, read it back and check the round trip.
//!
//! `cargo run --example scenario_export -- [node_count] [out.json]`

use uasn_sim::ocean::{Role, World, WorldConfig};

fn main() -> uasn_sim::Result<()> {
    let mut args = std::env::args().skip(1);
    let node_count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(64);
    let out = args.next();

    let world = World::init_scenario(WorldConfig { node_count, seed: 7, ..WorldConfig::default() })?;
    let json = world.scenario_json()?;
    if let Some(path) = &out {
        std::fs::write(path, &json)?;
        println!("wrote {path}");
    }
    let restored = World::from_scenario_json(&json)?;
    let cas = world.nodes.iter().filter(|n| n.role == Role::Ca).count();
    println!(
        "{} nodes, {cas} CAs, {} subnets, sink {}, sources {:?}, range {:.0} m",
        world.len(),
        world.subnets.len(),
        world.sink,
        world.sources,
        world.comm_range_m
    );
    println!("{} bytes of JSON, round trip identical: {}", json.len(), restored.scenario_json()? == json);
    Ok(())
}
