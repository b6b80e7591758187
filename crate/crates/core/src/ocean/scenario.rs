//! Scenario documents: a JSON snapshot of a world's nodes and link table.
//!
//! Units: positions in metres, energy in the same abstract units as the
//! configured tx/rx costs, bandwidth in Hz, noise levels in dB.

use serde::{Deserialize, Serialize};

use super::{NodeId, NodeState, Normalizers, Role, Subnet, World, WorldConfig};
use crate::acoustics::{total_spl, NoiseSourceParams};
use crate::error::{Error, Result};

pub const SCENARIO_FORMAT: &str = "uasn-scenario/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub role: Role,
    pub position_m: [f64; 3],
    pub energy: f64,
    pub failed: bool,
    pub subnet: usize,
    pub noise: NoiseSourceParams,
    /// Neighbor table as of the last topology refresh; recomputed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<Vec<NodeId>>,
}

/// One undirected link; success averages are kept per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth_hz: f64,
    pub success_ab: f64,
    pub success_ba: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub format: String,
    pub config: WorldConfig,
    pub comm_range_m: f64,
    pub effective_ca_spacing_m: f64,
    pub warnings: Vec<String>,
    pub subnets: Vec<Subnet>,
    pub nodes: Vec<NodeRecord>,
    pub links: Vec<LinkRecord>,
}

impl World {
    pub fn to_scenario(&self) -> ScenarioDocument {
        let n = self.len();
        let nodes = self
            .nodes
            .iter()
            .map(|node| NodeRecord {
                id: node.id,
                role: node.role,
                position_m: node.position,
                energy: node.energy,
                failed: node.failed,
                subnet: node.subnet,
                noise: node.noise,
                adjacency: Some(node.adjacency_view.clone()),
            })
            .collect();
        let mut links = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for a in 0..n {
            for b in (a + 1)..n {
                links.push(LinkRecord {
                    a,
                    b,
                    bandwidth_hz: self.bandwidth[a * n + b],
                    success_ab: self.success[a * n + b],
                    success_ba: self.success[b * n + a],
                });
            }
        }
        ScenarioDocument {
            format: SCENARIO_FORMAT.to_string(),
            config: self.config.clone(),
            comm_range_m: self.comm_range_m,
            effective_ca_spacing_m: self.effective_ca_spacing_m,
            warnings: self.warnings.clone(),
            subnets: self.subnets.clone(),
            nodes,
            links,
        }
    }

    pub fn from_scenario(doc: &ScenarioDocument) -> Result<World> {
        if doc.format != SCENARIO_FORMAT {
            return Err(Error::Parse(format!("unsupported scenario format {:?}", doc.format)));
        }
        let n = doc.nodes.len();
        if n == 0 {
            return Err(Error::Parse("scenario has no nodes".into()));
        }
        let edge = doc.config.cube_edge_m;
        let mut nodes = Vec::with_capacity(n);
        for (expected, rec) in doc.nodes.iter().enumerate() {
            if rec.id != expected {
                return Err(Error::Parse(format!("node ids must be dense and ordered; found {} at {expected}", rec.id)));
            }
            if rec.position_m.iter().any(|&c| !(0.0..=edge).contains(&c)) {
                return Err(Error::Parse(format!("node {} lies outside the cube", rec.id)));
            }
            if rec.subnet >= doc.subnets.len() {
                return Err(Error::Parse(format!("node {} names unknown subnet {}", rec.id, rec.subnet)));
            }
            rec.noise.validate()?;
            let noise_sources_db = rec.noise.source_levels()?;
            let spl_total_db = total_spl(&noise_sources_db)?;
            nodes.push(NodeState {
                id: rec.id,
                role: rec.role,
                position: rec.position_m,
                adjacency_view: Vec::new(),
                noise: rec.noise,
                noise_sources_db,
                spl_total_db,
                energy: rec.energy,
                failed: rec.failed,
                subnet: rec.subnet,
            });
        }
        let sinks: Vec<NodeId> = nodes.iter().filter(|n| n.role == Role::Sink).map(|n| n.id).collect();
        let [sink] = sinks[..] else {
            return Err(Error::Parse("scenario needs exactly one sink".into()));
        };
        for subnet in &doc.subnets {
            if subnet.ca >= n || nodes[subnet.ca].role != Role::Ca {
                return Err(Error::Parse(format!("subnet head {} is not a CA", subnet.ca)));
            }
            if let Some(&bad) = subnet.members.iter().find(|&&m| m >= n) {
                return Err(Error::UnknownNode(bad));
            }
        }

        let mut bandwidth = vec![0.0; n * n];
        let mut success = vec![1.0; n * n];
        let mut seen = vec![false; n * n];
        for link in &doc.links {
            let (a, b) = (link.a, link.b);
            if a >= n || b >= n || a == b {
                return Err(Error::Parse(format!("invalid link {a}-{b}")));
            }
            bandwidth[a * n + b] = link.bandwidth_hz;
            bandwidth[b * n + a] = link.bandwidth_hz;
            success[a * n + b] = link.success_ab;
            success[b * n + a] = link.success_ba;
            seen[a * n + b] = true;
            seen[b * n + a] = true;
        }
        if (0..n).any(|a| (0..n).any(|b| a != b && !seen[a * n + b])) {
            return Err(Error::Parse("link table is incomplete".into()));
        }

        let mut world = World {
            config: doc.config.clone(),
            nodes,
            subnets: doc.subnets.clone(),
            sink,
            sources: doc.nodes.iter().filter(|n| n.role == Role::Source).map(|n| n.id).collect(),
            comm_range_m: doc.comm_range_m,
            effective_ca_spacing_m: doc.effective_ca_spacing_m,
            warnings: doc.warnings.clone(),
            bandwidth,
            success,
            norms: Normalizers { d_max: 0.0, s_min: 0.0, s_max: 0.0, b_min: 0.0, b_max: 0.0, e_min: 0.0, e_max: 0.0 },
            tx_events: 0,
            rx_events: 0,
        };
        if doc.nodes.iter().any(|rec| rec.adjacency.is_none()) {
            world.refresh_adjacency();
        } else {
            for (node, rec) in world.nodes.iter_mut().zip(&doc.nodes) {
                let adjacency = rec.adjacency.clone().unwrap_or_default();
                if let Some(&bad) = adjacency.iter().find(|&&j| j >= n) {
                    return Err(Error::UnknownNode(bad));
                }
                node.adjacency_view = adjacency;
            }
        }
        world.refresh_bandwidth_norms();
        world.refresh_signal_norms();
        world.refresh_energy_norms();
        Ok(world)
    }

    pub fn scenario_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_scenario())?)
    }

    pub fn from_scenario_json(text: &str) -> Result<World> {
        World::from_scenario(&serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocean::{EnergyEvent, FailureSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut w = World::init_scenario(WorldConfig { seed: 12, ..Default::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        w.step_mobility(&mut rng);
        w.inject_failure(&FailureSpec::Rate(0.2), &mut rng).unwrap();
        let dr = w.failure_candidates()[0];
        w.consume_energy(dr, EnergyEvent::Tx).unwrap();
        w.record_link_outcome(dr, w.sink, false);
        w.tx_events = 0;
        let back = World::from_scenario_json(&w.scenario_json().unwrap()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn rejects_broken_documents() {
        let w = World::init_scenario(WorldConfig::default()).unwrap();
        let mut doc = w.to_scenario();
        doc.links.pop();
        assert!(World::from_scenario(&doc).is_err());
        let mut doc = w.to_scenario();
        doc.format = "other".into();
        assert!(World::from_scenario(&doc).is_err());
        let mut doc = w.to_scenario();
        doc.nodes[0].role = Role::Dr;
        assert!(World::from_scenario(&doc).is_err());
    }
}
