//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

pub mod gradcheck;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uasn_sim::marl::{Agents, Algorithm, RewardWeights, TrainConfig};
use uasn_sim::nn::Parameters;
use uasn_sim::ocean::{NodeId, Role, World, WorldConfig};
use uasn_sim::routing::{RoutingConfig, Simulation};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central finite differences of `f` over every parameter of `p`.
pub fn numeric_gradient<P: Parameters + Clone>(p: &P, h: f64, f: impl Fn(&P) -> f64) -> Vec<f64> {
    let base = p.flat();
    let mut out = Vec::with_capacity(base.len());
    let mut probe = p.clone();
    for k in 0..base.len() {
        let mut v = base.clone();
        v[k] = base[k] + h;
        probe.set_flat(&v).unwrap();
        let plus = f(&probe);
        v[k] = base[k] - h;
        probe.set_flat(&v).unwrap();
        let minus = f(&probe);
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

/// Central finite differences of `f` over a plain vector.
pub fn numeric_gradient_vec(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut v = x.to_vec();
            v[k] = x[k] + h;
            let plus = f(&v);
            v[k] = x[k] - h;
            let minus = f(&v);
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Overwrite every parameter with uniform draws in `[-scale, scale]`.
pub fn randomize<P: Parameters>(p: &mut P, rng: &mut impl Rng, scale: f64) {
    let n = p.param_count();
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    p.set_flat(&v).unwrap();
}

pub const GRID_SIDE: usize = 6;
pub const GRID_SPACING_M: f64 = 1_000.0;

pub fn grid_id(x: usize, y: usize) -> NodeId {
    y * GRID_SIDE + x
}

/// A 6×6 planar grid, 1 km spacing, 4-neighbour connectivity.
///
/// Sink at (0,0), source at (5,5), the CA at (5,0). No drift.
pub fn grid36() -> World {
    let mut positions = Vec::new();
    let mut roles = Vec::new();
    for y in 0..GRID_SIDE {
        for x in 0..GRID_SIDE {
            positions.push([500.0 + x as f64 * GRID_SPACING_M, 500.0 + y as f64 * GRID_SPACING_M, 5_000.0]);
            roles.push(Role::Dr);
        }
    }
    roles[grid_id(0, 0)] = Role::Sink;
    roles[grid_id(5, 5)] = Role::Source;
    roles[grid_id(5, 0)] = Role::Ca;
    let config = WorldConfig {
        comm_range_m: Some(1.05 * GRID_SPACING_M),
        mobility_sigma_m: 0.0,
        allow_any_grid: true,
        seed: 36,
        ..WorldConfig::default()
    };
    World::from_layout(config, positions, roles).unwrap()
}

/// Unique path used by the forced-path fixture: up the right edge, then along the bottom row.
pub fn forced_path() -> Vec<NodeId> {
    let mut path: Vec<NodeId> = (0..GRID_SIDE).rev().map(|y| grid_id(5, y)).collect();
    path.extend((0..5).rev().map(|x| grid_id(x, 0)));
    path
}

/// Kill every DR node outside `keep`.
pub fn keep_only(world: &mut World, keep: &[NodeId]) {
    let victims: Vec<NodeId> = world.failure_candidates().into_iter().filter(|n| !keep.contains(n)).collect();
    world.inject_failure(&uasn_sim::ocean::FailureSpec::Ids(victims), &mut rng(0)).unwrap();
}

pub fn fixture_sim(world: World, algorithm: Algorithm, seed: u64, max_ticks: u64) -> (Simulation, Agents) {
    let agents = Agents::new(&world, algorithm, &TrainConfig::default(), seed);
    let sim = Simulation::new(world, algorithm, RoutingConfig::default(), RewardWeights::default(), seed, 0, max_ticks).unwrap();
    (sim, agents)
}
