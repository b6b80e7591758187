//! Tick-driven packet routing with CA network views and interrupt handling.
//!
//! Each tick runs, in order: packet injection, scheduled failures, node
//! drift, the periodic topology and view refresh, delivery of last tick's
//! interrupt requests, resumption of buffered packets, and one routing
//! decision per in-flight packet with nodes visited in ascending id order.

mod packet;
mod task;

pub use packet::{Hop, InterruptRequest, Packet, PacketStatus, StatusCounts};
pub use task::{delivered_paths, path_delays, run_routing_task, RoutingTask, TaskMetrics, TaskOutcome};

use std::collections::BTreeMap;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marl::{
    critic_obs_dim, masked_policy, sample_index, stream_rng, total_reward, Agents, Algorithm, HopOutcome,
    RewardComponents, RewardWeights, TrainConfig, Transition, CANDIDATE_DIM, TrainContext, train_iteration,
};
use crate::marl::{delay_reward, forwarding_reward, hop_reward, noise_reward};
use crate::mask::{apply_mask, candidate_tokens, sink_progress, spl_feature, update_network_view, ActionMask, MaskThreshold, NetworkView, TOKEN_DIM};
use crate::ocean::{EnergyEvent, FailureSpec, NodeId, SinkOracle, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutingConfig {
    /// Ticks between periodic topology and view refreshes.
    pub refresh_interval: u64,
    /// Hop cap after which a packet is orphaned.
    pub h_max: usize,
    /// Policy iterations a CA runs after an interrupt-driven view update.
    pub fine_tune_iterations: usize,
    pub mask_threshold: MaskThreshold,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self { refresh_interval: 50, h_max: 20, fine_tune_iterations: 5, mask_threshold: MaskThreshold::HalfUniform }
    }
}

impl RoutingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.refresh_interval == 0 {
            return Err(Error::Config("refresh_interval must be at least 1".into()));
        }
        if self.h_max == 0 {
            return Err(Error::Config("h_max must be at least 1".into()));
        }
        if let MaskThreshold::Fixed(t) = self.mask_threshold {
            if t.is_nan() || t < 0.0 {
                return Err(Error::Config("mask threshold must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// What the learner needs to fine-tune a CA's policy after an interrupt.
#[derive(Debug, Clone)]
pub struct FineTune {
    pub train: TrainConfig,
    pub rewards: RewardWeights,
    pub seed: u64,
}

/// Running invariant checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub ticks: u64,
    pub conservation_violations: u64,
    /// Sampled actions that the mask had excluded.
    pub mask_violations: u64,
    /// Transmissions toward a node the current view marks unreachable.
    pub view_violations: u64,
    pub max_policy_sum_error: f64,
    pub decisions: u64,
    pub candidate_actions: u64,
    pub masked_actions: u64,
    pub interrupts: u64,
    pub view_updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteOutcome {
    Forwarded(NodeId),
    Delivered,
    Buffered,
    Dropped,
    Orphaned,
}

/// A sampled next hop, before transmission.
#[derive(Debug, Clone)]
pub struct Decision {
    pub node: NodeId,
    pub packet: usize,
    pub candidates: Vec<NodeId>,
    pub features: Array2<f64>,
    pub mask: ActionMask,
    pub probs: Vec<f64>,
    pub action: usize,
    pub next_hop: NodeId,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub world: World,
    pub algorithm: Algorithm,
    pub config: RoutingConfig,
    pub rewards: RewardWeights,
    pub tick: u64,
    /// Ticks after which all unfinished packets are orphaned.
    pub max_ticks: u64,
    pub packets: Vec<Packet>,
    created: usize,
    last_transition: Vec<Option<usize>>,
    /// One view per subnet, indexed like `world.subnets`.
    pub views: Vec<NetworkView>,
    pub audit: Audit,
    pub transitions: Vec<Transition>,
    pub record_transitions: bool,
    pub fine_tune: Option<FineTune>,
    pending: Vec<InterruptRequest>,
    outgoing: BTreeMap<(NodeId, NodeId), Vec<usize>>,
    injections: BTreeMap<u64, Vec<NodeId>>,
    failures: BTreeMap<u64, Vec<NodeId>>,
    mobility_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    oracle: Option<SinkOracle>,
    region_summary: Vec<f64>,
    pub finished: bool,
}

impl Simulation {
    pub fn new(world: World, algorithm: Algorithm, config: RoutingConfig, rewards: RewardWeights, seed: u64, episode: u64, max_ticks: u64) -> Result<Simulation> {
        config.validate()?;
        let views = world.subnets.iter().map(|s| NetworkView::new(s.ca)).collect();
        Ok(Simulation {
            world,
            algorithm,
            config,
            rewards,
            tick: 0,
            max_ticks,
            packets: Vec::new(),
            created: 0,
            last_transition: Vec::new(),
            views,
            audit: Audit::default(),
            transitions: Vec::new(),
            record_transitions: false,
            fine_tune: None,
            pending: Vec::new(),
            outgoing: BTreeMap::new(),
            injections: BTreeMap::new(),
            failures: BTreeMap::new(),
            mobility_rng: stream_rng(seed, 2, episode),
            policy_rng: stream_rng(seed, 3, episode),
            oracle: None,
            region_summary: Vec::new(),
            finished: false,
        })
    }

    /// Schedule one packet from `source` at `tick`.
    pub fn schedule_packet(&mut self, tick: u64, source: NodeId) -> Result<()> {
        self.world.node(source)?;
        self.injections.entry(tick).or_default().push(source);
        Ok(())
    }

    /// Schedule failures; ticks at or before the current tick apply immediately.
    pub fn schedule_failures(&mut self, tick: u64, nodes: Vec<NodeId>) -> Result<()> {
        if tick <= self.tick {
            let mut rng = stream_rng(0, 0, 0);
            self.world.inject_failure(&FailureSpec::Ids(nodes), &mut rng)?;
        } else {
            for &n in &nodes {
                if self.world.node(n)?.role.is_special() {
                    return Err(Error::Config(format!("node {n} cannot fail")));
                }
            }
            self.failures.entry(tick).or_default().extend(nodes);
        }
        Ok(())
    }

    pub fn counts(&self) -> StatusCounts {
        StatusCounts::of(&self.packets)
    }

    pub fn view_of(&self, node: NodeId) -> &NetworkView {
        &self.views[self.world.nodes[node].subnet]
    }

    fn uses_views(&self) -> bool {
        self.algorithm.uses_mask()
    }

    pub fn refresh_views(&mut self, agents: &Agents) -> Result<()> {
        for k in 0..self.views.len() {
            self.update_view(k, agents)?;
        }
        Ok(())
    }

    fn update_view(&mut self, subnet: usize, agents: &Agents) -> Result<()> {
        let scorer = agents.regions[subnet]
            .actor
            .scorer
            .as_ref()
            .ok_or_else(|| Error::State("masked routing needs an attention scorer".into()))?;
        update_network_view(&self.world, &mut self.views[subnet], scorer, self.config.mask_threshold, self.tick)?;
        self.audit.view_updates += 1;
        Ok(())
    }

    /// No packets pending, scheduled or in motion.
    pub fn is_quiescent(&self) -> bool {
        self.injections.range(self.tick..).next().is_none()
            && self.packets.iter().all(|p| p.status.is_terminal())
    }

    /// Advance until quiescent or the tick limit, then orphan leftovers.
    pub fn run(&mut self, agents: &mut Agents) -> Result<()> {
        while !self.finished && self.tick < self.max_ticks && !self.is_quiescent() {
            self.step(agents)?;
        }
        self.finish();
        Ok(())
    }

    /// Close the episode: anything not delivered or dropped becomes orphaned.
    pub fn finish(&mut self) {
        if self.finished {
            return;
        }
        let open: Vec<usize> = self.packets.iter().filter(|p| !p.status.is_terminal()).map(|p| p.id).collect();
        for id in open {
            self.lose(id, PacketStatus::Orphaned).expect("loss weights validated");
        }
        self.finished = true;
        self.audit_conservation();
    }

    pub fn step(&mut self, agents: &mut Agents) -> Result<()> {
        if self.finished {
            return Err(Error::State("simulation already finished".into()));
        }
        let t = self.tick;
        if let Some(sources) = self.injections.remove(&t) {
            for source in sources {
                let id = self.packets.len();
                let mut packet = Packet::new(id, source, self.world.sink, t);
                if !self.world.is_alive(source) {
                    packet.status = PacketStatus::Orphaned;
                }
                self.packets.push(packet);
                self.last_transition.push(None);
                self.created += 1;
            }
        }
        if let Some(nodes) = self.failures.remove(&t) {
            let live: Vec<NodeId> = nodes.into_iter().filter(|&n| self.world.is_alive(n)).collect();
            let mut rng = stream_rng(0, 0, 0);
            self.world.inject_failure(&FailureSpec::Ids(live), &mut rng)?;
        }
        if t > 0 {
            self.world.step_mobility(&mut self.mobility_rng);
        }
        if self.record_transitions {
            self.oracle = Some(self.world.sink_oracle());
        }
        if t.is_multiple_of(self.config.refresh_interval) {
            self.world.refresh_adjacency();
            if self.uses_views() {
                self.refresh_views(agents)?;
            }
        }
        self.deliver_requests(agents)?;
        self.resume_buffered();
        self.region_summary = self.summarize_regions();

        let mut queue: Vec<(NodeId, usize)> = self
            .packets
            .iter()
            .filter(|p| p.status == PacketStatus::InFlight)
            .map(|p| (p.location, p.id))
            .collect();
        queue.sort_unstable();
        for (node, id) in queue {
            if self.world.is_alive(node) {
                self.route_step(agents, node, id)?;
            } else {
                // A dead holder can neither send nor report.
                self.lose(id, PacketStatus::Orphaned)?;
            }
        }
        self.flush_requests();
        self.tick += 1;
        self.audit.ticks += 1;
        self.audit_conservation();
        Ok(())
    }

    fn audit_conservation(&mut self) {
        let counts = StatusCounts { created: self.created, ..self.counts() };
        if !counts.conserved() {
            self.audit.conservation_violations += 1;
        }
    }

    /// Batch this tick's failed transmissions into one request per (requester, next hop).
    pub fn flush_requests(&mut self) {
        let t = self.tick;
        let issued: Vec<InterruptRequest> = std::mem::take(&mut self.outgoing)
            .into_iter()
            .map(|((requester, next_hop), packet_ids)| InterruptRequest {
                requester,
                unreachable_next_hop: next_hop,
                packet_ids,
                issued_at: t,
                ca: self.world.ca_of(requester),
            })
            .collect();
        self.audit.interrupts += issued.len() as u64;
        self.pending.extend(issued);
    }

    /// Requests issued and not yet delivered to their CA.
    pub fn requests(&self) -> &[InterruptRequest] {
        &self.pending
    }

    /// Requests issued last tick reach their CAs: immediate view update, then fine-tuning.
    fn deliver_requests(&mut self, agents: &mut Agents) -> Result<()> {
        let requests = std::mem::take(&mut self.pending);
        let mut subnets: Vec<usize> = Vec::new();
        for req in &requests {
            let subnet = self.ca_handle_request(req)?;
            if !subnets.contains(&subnet) {
                subnets.push(subnet);
            }
        }
        subnets.sort_unstable();
        for subnet in subnets {
            self.update_view(subnet, agents)?;
            if let Some(ft) = &self.fine_tune {
                if self.config.fine_tune_iterations > 0 {
                    let ft = ft.clone();
                    self.run_fine_tune(agents, subnet, &ft)?;
                }
            }
        }
        Ok(())
    }

    /// Subnet whose CA serves `request`; requests addressed to a foreign CA
    /// are forwarded to the requester's own.
    pub fn ca_handle_request(&self, request: &InterruptRequest) -> Result<usize> {
        let node = self.world.node(request.requester)?;
        if request.packet_ids.is_empty() {
            return Err(Error::State("interrupt request without packets".into()));
        }
        Ok(node.subnet)
    }

    fn run_fine_tune(&mut self, agents: &mut Agents, subnet: usize, ft: &FineTune) -> Result<()> {
        let snapshot = self.world.clone();
        let ctx = TrainContext {
            train: ft.train.clone(),
            routing: RoutingConfig { fine_tune_iterations: 0, ..self.config },
            rewards: ft.rewards,
            seed: ft.seed,
            failure_rate: 0.0,
            only_region: Some(subnet),
        };
        // Episode indices well clear of the ones used by regular training.
        let base = (1u64 << 32) + (self.tick << 8) + ((subnet as u64) << 4);
        for it in 0..self.config.fine_tune_iterations as u64 {
            train_iteration(&snapshot, agents, &ctx, base + it)?;
        }
        Ok(())
    }

    fn resume_buffered(&mut self) {
        for p in self.packets.iter_mut().filter(|p| p.status == PacketStatus::BufferedPending) {
            let view = &self.views[self.world.nodes[p.location].subnet];
            if view.version > p.buffered_version {
                p.status = PacketStatus::InFlight;
            }
        }
    }

    /// Per-region features for the centralized critic.
    fn summarize_regions(&self) -> Vec<f64> {
        let norms = self.world.normalizers();
        let carried = self.packets.iter().filter(|p| !p.status.is_terminal()).count().max(1) as f64;
        let mut out = Vec::with_capacity(4 * self.world.subnets.len());
        for (k, subnet) in self.world.subnets.iter().enumerate() {
            let members = subnet.members.len().max(1) as f64;
            let alive: Vec<NodeId> = subnet.members.iter().copied().filter(|&m| self.world.is_alive(m)).collect();
            let energy = if alive.is_empty() {
                0.0
            } else {
                alive.iter().map(|&m| normalize(self.world.nodes[m].energy, norms.e_min, norms.e_max)).sum::<f64>() / alive.len() as f64
            };
            let load = self
                .packets
                .iter()
                .filter(|p| !p.status.is_terminal() && self.world.nodes[p.location].subnet == k)
                .count() as f64
                / carried;
            let staleness = (self.tick.saturating_sub(self.views[k].updated_at)) as f64 / self.config.refresh_interval as f64;
            out.extend([alive.len() as f64 / members, energy, load, staleness.min(1.0)]);
        }
        out
    }

    fn critic_state(&self, node: NodeId, packet: &Packet, candidate_count: usize) -> Vec<f64> {
        let norms = self.world.normalizers();
        let n = &self.world.nodes[node];
        let mut state = Vec::with_capacity(critic_obs_dim(self.world.subnets.len()));
        state.extend([
            spl_feature(n.spl_total_db),
            normalize(n.energy, norms.e_min, norms.e_max),
            packet.hops() as f64 / self.config.h_max as f64,
            self.world.distance(node, self.world.sink) / norms.d_max,
            candidate_count as f64 / 20.0,
        ]);
        state.extend_from_slice(&self.region_summary);
        state
    }

    /// Next hops not yet visited: the CA view in masked modes, the raw adjacency table otherwise.
    pub fn candidates(&self, node: NodeId, packet: &Packet) -> Vec<NodeId> {
        let base = if self.uses_views() {
            self.view_of(node).reachable_from(node)
        } else {
            self.world.nodes[node].adjacency_view.clone()
        };
        base.into_iter().filter(|&j| j != node && !packet.visited(j)).collect()
    }

    /// Build candidate features and sample a next hop. `None` when no candidate exists.
    pub fn decide(&mut self, agents: &Agents, node: NodeId, packet_id: usize) -> Result<Option<Decision>> {
        let packet = self.packets.get(packet_id).ok_or_else(|| Error::State(format!("unknown packet {packet_id}")))?;
        let candidates = self.candidates(node, packet);
        if candidates.is_empty() {
            return Ok(None);
        }
        let tokens = candidate_tokens(&self.world, node, &candidates)?;
        let norms = self.world.normalizers();
        let hop_fraction = packet.hops() as f64 / self.config.h_max as f64;
        let mut features = Array2::zeros((candidates.len(), CANDIDATE_DIM));
        for (row, &j) in candidates.iter().enumerate() {
            let mut f = features.row_mut(row);
            for k in 0..TOKEN_DIM {
                f[k] = tokens[[row, k]];
            }
            f[TOKEN_DIM] = sink_progress(&self.world, node, j);
            f[TOKEN_DIM + 1] = if j == self.world.sink { 1.0 } else { 0.0 };
            f[TOKEN_DIM + 2] = self.world.distance(j, self.world.sink) / norms.d_max;
            f[TOKEN_DIM + 3] = hop_fraction;
        }
        let state = self.critic_state(node, packet, candidates.len());
        let agent = &agents.regions[self.world.nodes[node].subnet];
        let fwd = agent.actor.forward(features.view())?;
        let mask = match &fwd.scores {
            Some(scores) if self.uses_views() => {
                apply_mask(scores, self.config.mask_threshold.resolve(candidates.len()))
            }
            _ => ActionMask::all_valid(candidates.len()),
        };
        let probs = masked_policy(&fwd.logits, &mask.binary)?;
        let sum_error = (probs.iter().sum::<f64>() - 1.0).abs();
        self.audit.max_policy_sum_error = self.audit.max_policy_sum_error.max(sum_error);
        let action = sample_index(&probs, &mut self.policy_rng);
        if !mask.binary[action] {
            self.audit.mask_violations += 1;
        }
        self.audit.decisions += 1;
        self.audit.candidate_actions += candidates.len() as u64;
        self.audit.masked_actions += mask.masked_count() as u64;
        Ok(Some(Decision {
            node,
            packet: packet_id,
            next_hop: candidates[action],
            candidates,
            features,
            mask,
            probs,
            action,
            state,
        }))
    }

    /// Attempt the decided hop against the physical world.
    pub fn transmit(&mut self, decision: Decision) -> Result<RouteOutcome> {
        let (i, j, id) = (decision.node, decision.next_hop, decision.packet);
        if self.uses_views() && !self.view_of(i).reachable(i, j) {
            self.audit.view_violations += 1;
        }
        let reachable = self.world.physically_reachable(i, j);
        let hop_success = self.rewards.p_forward(self.world.signal_strength(i, j));
        if self.record_transitions {
            let reward = self.decision_reward(i, j, id, reachable, hop_success)?;
            let log_prob = decision.probs[decision.action].ln();
            self.last_transition[id] = Some(self.transitions.len());
            self.transitions.push(Transition {
                agent: self.world.nodes[i].subnet,
                node: i,
                packet: id,
                tick: self.tick,
                state: decision.state,
                candidates: decision.features,
                mask: decision.mask,
                action: decision.action,
                log_prob,
                value: 0.0,
                reward,
                done: false,
                next_state: None,
            });
        }
        self.world.record_link_outcome(i, j, reachable);
        if reachable {
            self.world.consume_energy(i, EnergyEvent::Tx)?;
            self.world.consume_energy(j, EnergyEvent::Rx)?;
            let delay = self.world.distance(i, j) / self.world.config.sound_speed_mps;
            let arrival = self.tick + 1;
            let p = &mut self.packets[id];
            p.advance(j, arrival, delay);
            p.path_success *= hop_success;
            if j == self.world.sink {
                p.status = PacketStatus::Delivered;
                p.delivered_at = Some(arrival);
                return Ok(RouteOutcome::Delivered);
            }
            Ok(RouteOutcome::Forwarded(j))
        } else if self.algorithm.interrupts() {
            let version = self.view_of(i).version;
            let p = &mut self.packets[id];
            p.status = PacketStatus::BufferedPending;
            p.buffered_version = version;
            self.outgoing.entry((i, j)).or_default().push(id);
            Ok(RouteOutcome::Buffered)
        } else {
            self.world.consume_energy(i, EnergyEvent::Tx)?;
            self.lose(id, PacketStatus::Dropped)?;
            Ok(RouteOutcome::Dropped)
        }
    }

    /// Mark a packet dropped or orphaned; its last decision is charged a forwarding loss.
    fn lose(&mut self, id: usize, status: PacketStatus) -> Result<()> {
        self.packets[id].status = status;
        if let Some(k) = self.last_transition[id] {
            let w = &self.rewards;
            self.transitions[k].reward += w.theta1 * forwarding_reward(HopOutcome::Loss, 0.0, 1.0, w)?;
        }
        Ok(())
    }

    /// One routing decision for an in-flight packet held by `node`.
    pub fn route_step(&mut self, agents: &Agents, node: NodeId, packet_id: usize) -> Result<RouteOutcome> {
        if !self.world.node(node)?.alive() {
            return Err(Error::Routing(format!("node {node} is dead")));
        }
        let packet = self.packets.get(packet_id).ok_or_else(|| Error::State(format!("unknown packet {packet_id}")))?;
        if packet.location != node || packet.status != PacketStatus::InFlight {
            return Err(Error::State(format!("packet {packet_id} is not in flight at node {node}")));
        }
        if packet.hops() >= self.config.h_max {
            self.lose(packet_id, PacketStatus::Orphaned)?;
            return Ok(RouteOutcome::Orphaned);
        }
        match self.decide(agents, node, packet_id)? {
            Some(decision) => self.transmit(decision),
            None if self.algorithm.interrupts() => {
                let version = self.view_of(node).version;
                let p = &mut self.packets[packet_id];
                p.status = PacketStatus::BufferedPending;
                p.buffered_version = version;
                Ok(RouteOutcome::Buffered)
            }
            // Every neighbour already visited: the loop guard gives up on it.
            None => {
                self.lose(packet_id, PacketStatus::Orphaned)?;
                Ok(RouteOutcome::Orphaned)
            }
        }
    }

    /// Per-decision reward. The forwarding term is paid on delivery, with the
    /// product of per-hop forwarding probabilities; losses are charged in `lose`.
    fn decision_reward(&self, i: NodeId, j: NodeId, packet: usize, reachable: bool, hop_success: f64) -> Result<f64> {
        let oracle = self.oracle.as_ref().ok_or_else(|| Error::State("reward oracle missing".into()))?;
        let w = &self.rewards;
        let forwarding = if reachable && j == self.world.sink {
            let p = self.packets[packet].path_success * hop_success;
            forwarding_reward(HopOutcome::Success, p, 1.0 - p, w)?
        } else {
            0.0
        };
        let t_max = oracle.max_delay() + self.world.comm_range_m / self.world.config.sound_speed_mps;
        // Hop and delay terms score the change in distance-to-sink, so detours earn nothing.
        let standing = |node: NodeId, extra_delay: f64| -> Result<(f64, f64)> {
            Ok(match oracle.hops[node] {
                Some(h) => (hop_reward(h, w.alpha, w.beta), delay_reward(extra_delay + oracle.delay_s[node], 0.0, t_max, w.omega)?),
                None => (0.0, w.omega - 1.0),
            })
        };
        let (hop_i, delay_i) = standing(i, 0.0)?;
        let (hop_j, delay_j) = if reachable {
            standing(j, self.world.distance(i, j) / self.world.config.sound_speed_mps)?
        } else {
            (0.0, w.omega - 1.0)
        };
        let (hop, delay) = (hop_j - hop_i, delay_j - delay_i);
        let components = RewardComponents {
            forwarding,
            noise: noise_reward(self.world.nodes[j].spl_total_db, w.chi, w.varsigma),
            hop,
            delay,
        };
        Ok(total_reward(&components, w))
    }
}

fn normalize(x: f64, lo: f64, hi: f64) -> f64 {
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        1.0
    } else {
        ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}
