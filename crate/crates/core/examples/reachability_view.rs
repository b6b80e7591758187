//! Build each CA's network view, fail a node, and rebuild.
//!
//! `cargo run --example reachability_view -- [seed]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uasn_sim::mask::{update_network_view, AttentionScorer, MaskThreshold, NetworkView, TOKEN_DIM};
use uasn_sim::ocean::{FailureSpec, World, WorldConfig};

fn links(view: &NetworkView) -> usize {
    view.reachability.iter().flatten().filter(|&&r| r).count()
}

fn main() -> uasn_sim::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let mut world = World::init_scenario(WorldConfig { node_count: 125, ca_count: 4, seed, ..WorldConfig::default() })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scorer = AttentionScorer::new(TOKEN_DIM, &mut rng);

    let mut views: Vec<NetworkView> = world.subnets.iter().map(|s| NetworkView::new(s.ca)).collect();
    for view in &mut views {
        update_network_view(&world, view, &scorer, MaskThreshold::HalfUniform, 0)?;
        println!("CA {:>3}: {} nodes, {} directed links", view.ca, view.nodes.len(), links(view));
    }

    let failed = world.inject_failure(&FailureSpec::Rate(0.1), &mut rng)?;
    println!("failed {failed:?}");
    for view in &mut views {
        update_network_view(&world, view, &scorer, MaskThreshold::HalfUniform, 1)?;
        let dead_links = failed.iter().map(|&f| view.reachable_from(f).len()).sum::<usize>();
        println!("CA {:>3}: v{} {} directed links, {dead_links} out of failed nodes", view.ca, view.version, links(view));
    }
    Ok(())
}
