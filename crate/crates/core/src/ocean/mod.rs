//! The three-dimensional world: node placement, random drift, acoustic link
//! metrics, energy bookkeeping and failure injection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::acoustics::{total_spl, NoiseSourceParams};
use crate::error::{Error, Result};

mod scenario;
pub use scenario::{LinkRecord, NodeRecord, ScenarioDocument};

pub type NodeId = usize;

/// Node counts of the reference scenarios (4³, 5³, 6³).
pub const REFERENCE_NODE_COUNTS: [usize; 3] = [64, 125, 216];
pub const REFERENCE_CA_COUNTS: [usize; 3] = [1, 2, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Data-routing sensor.
    Dr,
    /// Central-aggregation sensor that owns a subnet and its network view.
    Ca,
    Source,
    Sink,
}

impl Role {
    /// Sources, sinks and CAs are never chosen for failure injection.
    pub fn is_special(self) -> bool {
        !matches!(self, Role::Dr)
    }
}

/// Ranges from which per-node noise parameters are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseFieldConfig {
    pub frequency_hz: f64,
    /// Scale applied to `frequency_hz` before it enters the source models.
    pub frequency_scale: f64,
    pub vehicle_speed: f64,
    pub vehicle_density_min: f64,
    pub vehicle_density_max: f64,
    pub temperature_k: f64,
    pub resistance_ohm: f64,
    pub receiver_bandwidth_hz: f64,
    pub base_turbulence_db: f64,
    pub turbulence_speed_min: f64,
    pub turbulence_speed_max: f64,
    pub wind_speed_min: f64,
    pub wind_speed_max: f64,
}

impl Default for NoiseFieldConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 20_000.0,
            frequency_scale: 1.0,
            vehicle_speed: 6.18,
            vehicle_density_min: 0.002,
            vehicle_density_max: 0.05,
            temperature_k: 290.0,
            resistance_ohm: 50.0,
            receiver_bandwidth_hz: 5_000.0,
            base_turbulence_db: crate::acoustics::DEFAULT_TURBULENCE_BASE_DB,
            turbulence_speed_min: 0.5,
            turbulence_speed_max: 2.0,
            wind_speed_min: 2.0,
            wind_speed_max: 20.0,
        }
    }
}

impl NoiseFieldConfig {
    fn draw(&self, rng: &mut ChaCha8Rng) -> NoiseSourceParams {
        // Vehicle density is log-uniform: shipping density spans decades.
        let (lo, hi) = (self.vehicle_density_min.ln(), self.vehicle_density_max.ln());
        let density = if hi > lo { rng.gen_range(lo..hi).exp() } else { lo.exp() };
        NoiseSourceParams {
            frequency_hz: self.frequency_hz * self.frequency_scale,
            vehicle_speed: self.vehicle_speed,
            vehicle_density: density,
            temperature_k: self.temperature_k,
            resistance_ohm: self.resistance_ohm,
            bandwidth_hz: self.receiver_bandwidth_hz,
            base_turbulence_db: self.base_turbulence_db,
            turbulence_speed: uniform(rng, self.turbulence_speed_min, self.turbulence_speed_max),
            wind_speed: uniform(rng, self.wind_speed_min, self.wind_speed_max),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub cube_edge_m: f64,
    pub node_count: usize,
    pub ca_count: usize,
    pub min_dr_spacing_m: f64,
    pub min_ca_spacing_m: f64,
    pub min_source_sink_m: f64,
    pub source_count: usize,
    /// Standard deviation of the per-axis drift per routing round.
    pub mobility_sigma_m: f64,
    pub sound_speed_mps: f64,
    /// Acoustic range; `None` means 1.5 grid spacings.
    pub comm_range_m: Option<f64>,
    pub initial_energy: f64,
    /// Energy multiplier for sources, sinks and CAs.
    pub special_energy_factor: f64,
    pub tx_cost: f64,
    pub rx_cost: f64,
    pub source_level_db: f64,
    pub bandwidth_min_hz: f64,
    pub bandwidth_max_hz: f64,
    /// Weight of the newest outcome in the link success moving average.
    pub success_ema: f64,
    pub noise: NoiseFieldConfig,
    /// Accept node/CA counts outside the reference scenarios.
    pub allow_any_grid: bool,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            cube_edge_m: 10_000.0,
            node_count: 64,
            ca_count: 1,
            min_dr_spacing_m: 1_000.0,
            min_ca_spacing_m: 10_000.0,
            min_source_sink_m: 10_000.0,
            source_count: 2,
            mobility_sigma_m: 30.0,
            sound_speed_mps: 1_500.0,
            comm_range_m: None,
            initial_energy: 1_000.0,
            special_energy_factor: 10.0,
            tx_cost: 1.0,
            rx_cost: 0.5,
            source_level_db: 170.0,
            bandwidth_min_hz: 2_000.0,
            bandwidth_max_hz: 8_000.0,
            success_ema: 0.2,
            noise: NoiseFieldConfig::default(),
            allow_any_grid: false,
            seed: 0,
        }
    }
}

impl WorldConfig {
    /// Grid size `g` with `node_count == g³`.
    pub fn grid_size(&self) -> Result<usize> {
        let g = (self.node_count as f64).cbrt().round() as usize;
        if g < 2 || g * g * g != self.node_count {
            return Err(Error::Config(format!(
                "node_count {} is not a cube of an integer ≥ 2",
                self.node_count
            )));
        }
        Ok(g)
    }

    pub fn grid_spacing(&self) -> Result<f64> {
        Ok(self.cube_edge_m / (self.grid_size()? - 1) as f64)
    }

    pub fn resolved_comm_range(&self) -> Result<f64> {
        match self.comm_range_m {
            Some(r) => Ok(r),
            None => Ok(1.5 * self.grid_spacing()?),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cube_edge_m", self.cube_edge_m),
            ("min_dr_spacing_m", self.min_dr_spacing_m),
            ("min_ca_spacing_m", self.min_ca_spacing_m),
            ("sound_speed_mps", self.sound_speed_mps),
            ("initial_energy", self.initial_energy),
            ("tx_cost", self.tx_cost),
            ("rx_cost", self.rx_cost),
            ("bandwidth_min_hz", self.bandwidth_min_hz),
            ("special_energy_factor", self.special_energy_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(r) = self.comm_range_m {
            if r.is_nan() || r <= 0.0 {
                return Err(Error::Config(format!("comm_range_m must be positive, got {r}")));
            }
        }
        if self.mobility_sigma_m.is_nan() || self.mobility_sigma_m < 0.0 {
            return Err(Error::Config("mobility_sigma_m must be non-negative".into()));
        }
        if self.bandwidth_max_hz < self.bandwidth_min_hz {
            return Err(Error::Config("bandwidth_max_hz < bandwidth_min_hz".into()));
        }
        if !(0.0..=1.0).contains(&self.success_ema) {
            return Err(Error::Config("success_ema must lie in [0, 1]".into()));
        }
        let g = self.grid_size()?;
        if !self.allow_any_grid {
            if !REFERENCE_NODE_COUNTS.contains(&self.node_count) {
                return Err(Error::Config(format!(
                    "node_count {} not in {:?} (set allow_any_grid to override)",
                    self.node_count, REFERENCE_NODE_COUNTS
                )));
            }
            if !REFERENCE_CA_COUNTS.contains(&self.ca_count) {
                return Err(Error::Config(format!(
                    "ca_count {} not in {:?} (set allow_any_grid to override)",
                    self.ca_count, REFERENCE_CA_COUNTS
                )));
            }
        }
        if self.ca_count == 0 {
            return Err(Error::Config("ca_count must be at least 1".into()));
        }
        if self.source_count == 0 || self.source_count > 7 {
            return Err(Error::Config("source_count must be in 1..=7 (cube corners)".into()));
        }
        if self.ca_count + self.source_count + 1 > self.node_count {
            return Err(Error::Config("not enough nodes for the special roles".into()));
        }
        let spacing = self.cube_edge_m / (g - 1) as f64;
        if self.min_dr_spacing_m > spacing + 1e-9 {
            return Err(Error::Config(format!(
                "min_dr_spacing_m {} exceeds grid spacing {spacing:.1}",
                self.min_dr_spacing_m
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    pub role: Role,
    pub position: [f64; 3],
    /// Nodes in acoustic range at the last topology refresh, regardless of liveness.
    pub adjacency_view: Vec<NodeId>,
    pub noise: NoiseSourceParams,
    /// Active source levels (dB) that make up `spl_total_db`.
    pub noise_sources_db: Vec<f64>,
    pub spl_total_db: f64,
    pub energy: f64,
    pub failed: bool,
    /// Index of the subnet (and CA) this node belongs to.
    pub subnet: usize,
}

impl NodeState {
    pub fn alive(&self) -> bool {
        self.energy > 0.0 && !self.failed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub distance_m: f64,
    pub signal_strength_db: f64,
    pub bandwidth: f64,
    pub propagation_delay_s: f64,
    pub success_history: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyEvent {
    Tx,
    Rx,
}

/// Observed ranges used to normalize reachability indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub d_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub e_min: f64,
    pub e_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subnet {
    pub ca: NodeId,
    pub members: Vec<NodeId>,
}

/// Which nodes an `inject_failure` call takes down.
#[derive(Debug, Clone, PartialEq)]
pub enum FailureSpec {
    Ids(Vec<NodeId>),
    /// Each eligible DR node fails independently with this probability.
    Rate(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    pub nodes: Vec<NodeState>,
    pub subnets: Vec<Subnet>,
    pub sink: NodeId,
    pub sources: Vec<NodeId>,
    pub comm_range_m: f64,
    /// Minimum pairwise CA distance actually achieved.
    pub effective_ca_spacing_m: f64,
    pub warnings: Vec<String>,
    /// Symmetric per-link bandwidth, row-major n×n.
    bandwidth: Vec<f64>,
    /// Directed exponential moving average of delivery outcomes, row-major n×n.
    success: Vec<f64>,
    norms: Normalizers,
    pub tx_events: u64,
    pub rx_events: u64,
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn reflect(mut x: f64, edge: f64) -> f64 {
    // A single reflection suffices unless the step exceeds the cube; loop for safety.
    for _ in 0..8 {
        if x < 0.0 {
            x = -x;
        } else if x > edge {
            x = 2.0 * edge - x;
        } else {
            return x;
        }
    }
    x.clamp(0.0, edge)
}

impl World {
    /// Jittered g×g×g grid with sink, sources and CAs assigned.
    pub fn init_scenario(config: WorldConfig) -> Result<World> {
        config.validate()?;
        let g = config.grid_size()?;
        let spacing = config.grid_spacing()?;
        let edge = config.cube_edge_m;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let mut positions = Vec::with_capacity(config.node_count);
        let mut grid_index = Vec::with_capacity(config.node_count);
        for ix in 0..g {
            for iy in 0..g {
                for iz in 0..g {
                    let base = [ix as f64 * spacing, iy as f64 * spacing, iz as f64 * spacing];
                    let mut p = [0.0; 3];
                    for axis in 0..3 {
                        let jitter = rng.gen_range(-0.25 * spacing..=0.25 * spacing);
                        p[axis] = reflect(base[axis] + jitter, edge);
                    }
                    positions.push(p);
                    grid_index.push([ix, iy, iz]);
                }
            }
        }

        let mut roles = vec![Role::Dr; config.node_count];
        let sink = 0; // grid corner (0,0,0)
        roles[sink] = Role::Sink;

        let last = g - 1;
        let mut corners: Vec<NodeId> = grid_index
            .iter()
            .enumerate()
            .filter(|(id, gi)| *id != sink && gi.iter().all(|&c| c == 0 || c == last))
            .map(|(id, _)| id)
            .collect();
        corners.sort_by(|&a, &b| {
            let da = distance(&positions[a], &positions[sink]);
            let db = distance(&positions[b], &positions[sink]);
            db.total_cmp(&da).then(a.cmp(&b))
        });
        let sources: Vec<NodeId> = corners.into_iter().take(config.source_count).collect();
        for &s in &sources {
            let d = distance(&positions[s], &positions[sink]);
            if d < config.min_source_sink_m {
                return Err(Error::Config(format!(
                    "source {s} only {d:.0} m from the sink (need {} m)",
                    config.min_source_sink_m
                )));
            }
            roles[s] = Role::Source;
        }

        for centroid in ca_centroids(config.ca_count, edge) {
            let ca = (0..config.node_count)
                .filter(|&id| roles[id] == Role::Dr)
                .min_by(|&a, &b| {
                    distance(&positions[a], &centroid)
                        .total_cmp(&distance(&positions[b], &centroid))
                        .then(a.cmp(&b))
                })
                .ok_or_else(|| Error::Config("no node available for a CA".into()))?;
            roles[ca] = Role::Ca;
        }

        World::build(config, positions, roles, &mut rng)
    }

    /// World with explicit positions and roles, for fixtures and imports.
    ///
    /// Exactly one sink and at least one CA are required. Node-count limits
    /// of the reference grids do not apply.
    pub fn from_layout(config: WorldConfig, positions: Vec<[f64; 3]>, roles: Vec<Role>) -> Result<World> {
        if positions.len() != roles.len() || positions.is_empty() {
            return Err(Error::Config("positions and roles must be non-empty and equal length".into()));
        }
        let edge = config.cube_edge_m;
        if positions.iter().flatten().any(|&c| !(0.0..=edge).contains(&c)) {
            return Err(Error::Config("node position outside the cube".into()));
        }
        if roles.iter().filter(|r| **r == Role::Sink).count() != 1 {
            return Err(Error::Config("layout needs exactly one sink".into()));
        }
        if !roles.contains(&Role::Ca) {
            return Err(Error::Config("layout needs at least one CA".into()));
        }
        let mut config = config;
        config.node_count = positions.len();
        config.ca_count = roles.iter().filter(|r| **r == Role::Ca).count();
        config.source_count = roles.iter().filter(|r| **r == Role::Source).count();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        World::build(config, positions, roles, &mut rng)
    }

    fn build(config: WorldConfig, positions: Vec<[f64; 3]>, roles: Vec<Role>, rng: &mut ChaCha8Rng) -> Result<World> {
        let n = positions.len();
        let comm_range_m = match config.comm_range_m {
            Some(r) => r,
            None => config.resolved_comm_range()?,
        };
        let sink = roles.iter().position(|r| *r == Role::Sink).expect("checked by callers");
        let sources: Vec<NodeId> = (0..n).filter(|&i| roles[i] == Role::Source).collect();
        let cas: Vec<NodeId> = (0..n).filter(|&i| roles[i] == Role::Ca).collect();

        let mut warnings = Vec::new();
        let mut effective_ca_spacing_m = f64::INFINITY;
        for (a, &ca_a) in cas.iter().enumerate() {
            for &ca_b in &cas[a + 1..] {
                effective_ca_spacing_m = effective_ca_spacing_m.min(distance(&positions[ca_a], &positions[ca_b]));
            }
        }
        if cas.len() > 1 && effective_ca_spacing_m < config.min_ca_spacing_m {
            warnings.push(format!(
                "CA spacing clamped from {:.0} m to the achievable {:.0} m",
                config.min_ca_spacing_m, effective_ca_spacing_m
            ));
        }
        if cas.len() == 1 {
            effective_ca_spacing_m = config.min_ca_spacing_m;
        }

        // Nearest-CA (Voronoi) subnet assignment.
        let mut subnets: Vec<Subnet> = cas.iter().map(|&ca| Subnet { ca, members: Vec::new() }).collect();
        let mut membership = vec![0usize; n];
        for id in 0..n {
            let best = (0..cas.len())
                .min_by(|&a, &b| {
                    distance(&positions[id], &positions[cas[a]])
                        .total_cmp(&distance(&positions[id], &positions[cas[b]]))
                        .then(a.cmp(&b))
                })
                .expect("at least one CA");
            membership[id] = best;
            subnets[best].members.push(id);
        }

        let mut nodes = Vec::with_capacity(n);
        for id in 0..n {
            let noise = config.noise.draw(rng);
            let noise_sources_db = noise.source_levels()?;
            let spl_total_db = total_spl(&noise_sources_db)?;
            let energy = if roles[id].is_special() {
                config.initial_energy * config.special_energy_factor
            } else {
                config.initial_energy
            };
            nodes.push(NodeState {
                id,
                role: roles[id],
                position: positions[id],
                adjacency_view: Vec::new(),
                noise,
                noise_sources_db,
                spl_total_db,
                energy,
                failed: false,
                subnet: membership[id],
            });
        }

        let mut bandwidth = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let b = uniform(rng, config.bandwidth_min_hz, config.bandwidth_max_hz);
                bandwidth[i * n + j] = b;
                bandwidth[j * n + i] = b;
            }
        }

        let mut world = World {
            config,
            nodes,
            subnets,
            sink,
            sources,
            comm_range_m,
            effective_ca_spacing_m,
            warnings,
            bandwidth,
            success: vec![1.0; n * n],
            norms: Normalizers { d_max: 0.0, s_min: 0.0, s_max: 0.0, b_min: 0.0, b_max: 0.0, e_min: 0.0, e_max: 0.0 },
            tx_events: 0,
            rx_events: 0,
        };
        world.refresh_adjacency();
        world.refresh_bandwidth_norms();
        world.refresh_signal_norms();
        world.refresh_energy_norms();
        Ok(world)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeState> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn is_alive(&self, id: NodeId) -> bool {
        self.nodes.get(id).is_some_and(|n| n.alive())
    }

    pub fn normalizers(&self) -> Normalizers {
        self.norms
    }

    pub fn ca_of(&self, id: NodeId) -> NodeId {
        self.subnets[self.nodes[id].subnet].ca
    }

    pub fn subnet_index_of_ca(&self, ca: NodeId) -> Option<usize> {
        self.subnets.iter().position(|s| s.ca == ca)
    }

    pub fn distance(&self, i: NodeId, j: NodeId) -> f64 {
        distance(&self.nodes[i].position, &self.nodes[j].position)
    }

    pub fn in_range(&self, i: NodeId, j: NodeId) -> bool {
        i != j && self.distance(i, j) <= self.comm_range_m
    }

    /// Both endpoints alive and within acoustic range.
    pub fn physically_reachable(&self, i: NodeId, j: NodeId) -> bool {
        self.is_alive(i) && self.is_alive(j) && self.in_range(i, j)
    }

    /// Received level minus local noise: `SL − 20·lg d − SPL_j`.
    pub fn signal_strength(&self, i: NodeId, j: NodeId) -> f64 {
        let d = self.distance(i, j).max(1.0);
        self.config.source_level_db - 20.0 * d.log10() - self.nodes[j].spl_total_db
    }

    pub fn bandwidth(&self, i: NodeId, j: NodeId) -> f64 {
        self.bandwidth[i * self.len() + j]
    }

    pub fn success_history(&self, i: NodeId, j: NodeId) -> f64 {
        self.success[i * self.len() + j]
    }

    pub fn link_metrics(&self, i: NodeId, j: NodeId) -> Result<LinkMetrics> {
        self.node(i)?;
        self.node(j)?;
        if i == j {
            return Err(Error::Domain(format!("link metrics of node {i} with itself")));
        }
        let distance_m = self.distance(i, j);
        Ok(LinkMetrics {
            distance_m,
            signal_strength_db: self.signal_strength(i, j),
            bandwidth: self.bandwidth(i, j),
            propagation_delay_s: distance_m / self.config.sound_speed_mps,
            success_history: self.success_history(i, j),
        })
    }

    /// Link metrics towards every node in `i`'s adjacency view.
    pub fn link_quality(&self, i: NodeId) -> Result<Vec<(NodeId, LinkMetrics)>> {
        self.node(i)?
            .adjacency_view
            .iter()
            .map(|&j| Ok((j, self.link_metrics(i, j)?)))
            .collect()
    }

    /// Fold one delivery outcome into the link's moving average.
    pub fn record_link_outcome(&mut self, i: NodeId, j: NodeId, delivered: bool) {
        let n = self.len();
        let w = self.config.success_ema;
        let cell = &mut self.success[i * n + j];
        *cell = (1.0 - w) * *cell + w * if delivered { 1.0 } else { 0.0 };
    }

    /// Recompute every node's table of live neighbors in range.
    pub fn refresh_adjacency(&mut self) {
        let n = self.len();
        for i in 0..n {
            let view: Vec<NodeId> = (0..n).filter(|&j| j != i && self.physically_reachable(i, j)).collect();
            self.nodes[i].adjacency_view = view;
        }
    }

    /// Isotropic Gaussian drift of every alive node, reflected at the cube faces.
    pub fn step_mobility(&mut self, rng: &mut impl Rng) {
        let sigma = self.config.mobility_sigma_m;
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("sigma validated");
            let edge = self.config.cube_edge_m;
            for node in self.nodes.iter_mut().filter(|n| n.alive()) {
                for axis in 0..3 {
                    node.position[axis] = reflect(node.position[axis] + normal.sample(rng), edge);
                }
            }
        }
        self.refresh_signal_norms();
    }

    pub fn consume_energy(&mut self, id: NodeId, event: EnergyEvent) -> Result<()> {
        let cost = match event {
            EnergyEvent::Tx => self.config.tx_cost,
            EnergyEvent::Rx => self.config.rx_cost,
        };
        let node = self.nodes.get_mut(id).ok_or(Error::UnknownNode(id))?;
        if !node.alive() {
            return Err(Error::State(format!("{event:?} on dead node {id}")));
        }
        node.energy = (node.energy - cost).max(0.0);
        match event {
            EnergyEvent::Tx => self.tx_events += 1,
            EnergyEvent::Rx => self.rx_events += 1,
        }
        self.refresh_energy_norms();
        Ok(())
    }

    /// Take nodes down. Special roles are never selected; returns the newly failed ids.
    pub fn inject_failure(&mut self, spec: &FailureSpec, rng: &mut impl Rng) -> Result<Vec<NodeId>> {
        let chosen: Vec<NodeId> = match spec {
            FailureSpec::Ids(ids) => {
                for &id in ids {
                    let node = self.node(id)?;
                    if node.role.is_special() {
                        return Err(Error::Config(format!("node {id} has role {:?} and cannot fail", node.role)));
                    }
                }
                ids.clone()
            }
            FailureSpec::Rate(rate) => {
                if !(0.0..=1.0).contains(rate) {
                    return Err(Error::Domain(format!("failure rate {rate} outside [0,1]")));
                }
                if *rate == 0.0 {
                    return Ok(Vec::new());
                }
                self.failure_candidates().into_iter().filter(|_| rng.gen_bool(*rate)).collect()
            }
        };
        let mut failed = Vec::new();
        for id in chosen {
            if !self.nodes[id].failed {
                self.nodes[id].failed = true;
                failed.push(id);
            }
        }
        if !failed.is_empty() {
            self.refresh_signal_norms();
            self.refresh_energy_norms();
        }
        Ok(failed)
    }

    /// Alive DR nodes, in id order.
    pub fn failure_candidates(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.role == Role::Dr && n.alive())
            .map(|n| n.id)
            .collect()
    }

    fn refresh_bandwidth_norms(&mut self) {
        let n = self.len();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            for j in (i + 1)..n {
                let b = self.bandwidth[i * n + j];
                lo = lo.min(b);
                hi = hi.max(b);
            }
        }
        if !lo.is_finite() {
            lo = self.config.bandwidth_min_hz;
            hi = self.config.bandwidth_max_hz;
        }
        self.norms.b_min = lo;
        self.norms.b_max = hi;
        self.norms.d_max = self.config.cube_edge_m * 3f64.sqrt();
    }

    fn refresh_signal_norms(&mut self) {
        let n = self.len();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            if !self.nodes[i].alive() {
                continue;
            }
            for j in 0..n {
                if j != i && self.nodes[j].alive() && self.in_range(i, j) {
                    let s = self.signal_strength(i, j);
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
            }
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 0.0;
        }
        self.norms.s_min = lo;
        self.norms.s_max = hi;
    }

    fn refresh_energy_norms(&mut self) {
        let mut pool: Vec<f64> = self
            .nodes
            .iter()
            .filter(|n| n.alive() && n.role == Role::Dr)
            .map(|n| n.energy)
            .collect();
        if pool.is_empty() {
            pool = self.nodes.iter().filter(|n| n.alive()).map(|n| n.energy).collect();
        }
        let lo = pool.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pool.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.norms.e_min = if lo.is_finite() { lo } else { 0.0 };
        self.norms.e_max = if hi.is_finite() { hi } else { 0.0 };
    }

    /// Exact shortest paths to the sink over the live acoustic graph.
    pub fn sink_oracle(&self) -> SinkOracle {
        let n = self.len();
        let mut hops: Vec<Option<u32>> = vec![None; n];
        let mut delay = vec![f64::INFINITY; n];
        if !self.is_alive(self.sink) {
            return SinkOracle { hops, delay_s: delay };
        }
        // Breadth-first hop counts.
        hops[self.sink] = Some(0);
        let mut frontier = vec![self.sink];
        let mut depth = 0;
        while !frontier.is_empty() {
            depth += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for v in 0..n {
                    if hops[v].is_none() && self.physically_reachable(u, v) {
                        hops[v] = Some(depth);
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        // Dense Dijkstra on propagation delay.
        let c = self.config.sound_speed_mps;
        let mut done = vec![false; n];
        delay[self.sink] = 0.0;
        for _ in 0..n {
            let Some(u) = (0..n)
                .filter(|&v| !done[v] && delay[v].is_finite())
                .min_by(|&a, &b| delay[a].total_cmp(&delay[b]).then(a.cmp(&b)))
            else {
                break;
            };
            done[u] = true;
            for v in 0..n {
                if !done[v] && self.physically_reachable(u, v) {
                    let cand = delay[u] + self.distance(u, v) / c;
                    if cand < delay[v] {
                        delay[v] = cand;
                    }
                }
            }
        }
        SinkOracle { hops, delay_s: delay }
    }
}

/// Ground-truth distances to the sink; used for rewards, never shown to agents.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkOracle {
    pub hops: Vec<Option<u32>>,
    pub delay_s: Vec<f64>,
}

impl SinkOracle {
    /// Largest finite delay to the sink.
    pub fn max_delay(&self) -> f64 {
        self.delay_s.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max)
    }
}

fn ca_centroids(count: usize, edge: f64) -> Vec<[f64; 3]> {
    if count == 4 {
        let q = edge / 4.0;
        return vec![
            [q, q, edge / 2.0],
            [3.0 * q, q, edge / 2.0],
            [q, 3.0 * q, edge / 2.0],
            [3.0 * q, 3.0 * q, edge / 2.0],
        ];
    }
    (0..count)
        .map(|k| [(k as f64 + 0.5) * edge / count as f64, edge / 2.0, edge / 2.0])
        .collect()
}
