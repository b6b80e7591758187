//! Evaluation runs: inject a packet batch, fail some nodes, and measure.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Audit, FineTune, Packet, PacketStatus, RoutingConfig, Simulation};
use crate::error::{Error, Result};
use crate::harness::{default_edges, histogram, Histogram};
use crate::marl::{stream_rng, Agents, Algorithm, RewardWeights, TrainConfig};
use crate::mask::NetworkView;
use crate::ocean::World;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutingTask {
    /// Number of packets, spread round-robin over the sources.
    pub packet_count: usize,
    pub packets_per_source_per_tick: usize,
    /// Fraction of DR nodes failed during the injection window.
    pub failure_rate: f64,
    /// Ticks allowed after the last injection before leftovers are orphaned.
    pub drain_ticks: u64,
    /// Let CAs fine-tune their policy after interrupt-driven view updates.
    pub fine_tune: bool,
    /// Histogram edges in seconds; scaled defaults when absent.
    pub histogram_edges: Option<Vec<f64>>,
}

impl Default for RoutingTask {
    fn default() -> Self {
        Self {
            packet_count: 500,
            packets_per_source_per_tick: 5,
            failure_rate: 0.1,
            drain_ticks: 400,
            fine_tune: true,
            histogram_edges: None,
        }
    }
}

impl RoutingTask {
    pub fn validate(&self) -> Result<()> {
        if self.packets_per_source_per_tick == 0 {
            return Err(Error::Config("packets_per_source_per_tick must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_rate) {
            return Err(Error::Config(format!("failure rate {} outside [0,1]", self.failure_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub algorithm: Algorithm,
    pub created: usize,
    pub delivered: usize,
    pub dropped: usize,
    pub orphaned: usize,
    pub delivery_ratio: f64,
    /// Mean propagation delay of delivered packets; NaN when none arrived.
    pub mean_delay_s: f64,
    pub mean_hops: f64,
    pub delay_histogram: Histogram,
    pub total_ticks: u64,
    pub interrupts: u64,
    pub view_updates: u64,
    pub failed_nodes: Vec<usize>,
    /// Mean decision reward per tick.
    pub reward_curve: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub metrics: TaskMetrics,
    pub packets: Vec<Packet>,
    pub audit: Audit,
    pub views: Vec<NetworkView>,
}

/// Route `task.packet_count` packets with `agents` on a copy of `world`.
///
/// Failure sets and timings depend only on `seed`, so algorithms compared
/// under the same seed face the same outages.
pub fn run_routing_task(
    world: &World,
    agents: &mut Agents,
    task: &RoutingTask,
    routing: &RoutingConfig,
    rewards: &RewardWeights,
    train: &TrainConfig,
    seed: u64,
) -> Result<TaskOutcome> {
    task.validate()?;
    let algorithm = agents.algorithm;
    let edges = match &task.histogram_edges {
        Some(e) => e.clone(),
        None => default_edges(world.len()),
    };
    if world.sources.is_empty() && task.packet_count > 0 {
        return Err(Error::Config("world has no sources".into()));
    }
    let per_tick = task.packets_per_source_per_tick * world.sources.len().max(1);
    let injection_ticks = task.packet_count.div_ceil(per_tick) as u64;
    let max_ticks = injection_ticks + task.drain_ticks;

    let mut sim = Simulation::new(world.clone(), algorithm, *routing, *rewards, seed, 1u64 << 48, max_ticks)?;
    sim.record_transitions = true;
    if task.fine_tune && algorithm.interrupts() {
        sim.fine_tune = Some(FineTune { train: train.clone(), rewards: *rewards, seed });
    }
    for k in 0..task.packet_count {
        let source = world.sources[(k / task.packets_per_source_per_tick) % world.sources.len()];
        sim.schedule_packet((k / per_tick) as u64, source)?;
    }

    let mut rng = stream_rng(seed, 11, 0);
    let mut candidates = world.failure_candidates();
    let count = (task.failure_rate * candidates.len() as f64).round() as usize;
    candidates.shuffle(&mut rng);
    let mut failed: Vec<usize> = candidates.into_iter().take(count).collect();
    failed.sort_unstable();
    let window = injection_ticks.max(2);
    for &node in &failed {
        sim.schedule_failures(rng.gen_range(1..window), vec![node])?;
    }

    sim.run(agents)?;

    let mut reward_curve = vec![0.0; sim.tick as usize];
    let mut per_tick = vec![0usize; sim.tick as usize];
    for tr in &sim.transitions {
        if let Some(slot) = reward_curve.get_mut(tr.tick as usize) {
            *slot += tr.reward;
            per_tick[tr.tick as usize] += 1;
        }
    }
    for (r, &c) in reward_curve.iter_mut().zip(&per_tick) {
        if c > 0 {
            *r /= c as f64;
        }
    }

    let counts = sim.counts();
    let delivered: Vec<&Packet> = sim.packets.iter().filter(|p| p.status == PacketStatus::Delivered).collect();
    let delays: Vec<f64> = delivered.iter().map(|p| p.accumulated_delay_s).collect();
    let mean = |xs: &[f64]| if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let hops: Vec<f64> = delivered.iter().map(|p| p.hops() as f64).collect();
    let metrics = TaskMetrics {
        algorithm,
        created: counts.created,
        delivered: counts.delivered,
        dropped: counts.dropped,
        orphaned: counts.orphaned,
        delivery_ratio: if counts.created == 0 { 0.0 } else { counts.delivered as f64 / counts.created as f64 },
        mean_delay_s: mean(&delays),
        mean_hops: mean(&hops),
        delay_histogram: histogram(&delays, &edges)?,
        total_ticks: sim.tick,
        interrupts: sim.audit.interrupts,
        view_updates: sim.audit.view_updates,
        failed_nodes: failed,
        reward_curve,
    };
    Ok(TaskOutcome { metrics, packets: sim.packets, audit: sim.audit, views: sim.views })
}

/// One line per delivered packet: id, hop ids and per-hop delays.
pub fn delivered_paths(packets: &[Packet]) -> String {
    let mut out = String::from("packet_id,hop_ids,hop_delays_s\n");
    for p in packets.iter().filter(|p| p.status == PacketStatus::Delivered) {
        let ids: Vec<String> = p.path().iter().map(|n| n.to_string()).collect();
        let delays: Vec<String> = p.hop_delays().iter().map(|d| format!("{d:.6}")).collect();
        out.push_str(&format!("{},{},{}\n", p.id, ids.join(";"), delays.join(";")));
    }
    out
}

/// Total propagation delay of every packet in a delivered-path export.
pub fn path_delays(csv: &str) -> Result<Vec<f64>> {
    let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some("packet_id,hop_ids,hop_delays_s") {
        return Err(Error::Parse("delivered-path header mismatch".into()));
    }
    lines
        .map(|line| {
            let delays = line.rsplit(',').next().unwrap_or_default();
            delays
                .split(';')
                .filter(|d| !d.is_empty())
                .map(|d| d.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad hop delay {d:?}"))))
                .sum()
        })
        .collect()
}
