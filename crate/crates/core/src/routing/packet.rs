use serde::{Deserialize, Serialize};

use crate::ocean::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketStatus {
    InFlight,
    BufferedPending,
    Delivered,
    Orphaned,
    /// Lost to an unreachable next hop; only the ablation modes drop packets.
    Dropped,
}

impl PacketStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, PacketStatus::Delivered | PacketStatus::Orphaned | PacketStatus::Dropped)
    }
}

/// One entry of a hop trace: arrival node, arrival tick, and the propagation
/// delay of the link that got it there (zero for the source entry).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub node: NodeId,
    pub tick: u64,
    pub delay_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub id: usize,
    pub source: NodeId,
    pub sink: NodeId,
    pub hop_trace: Vec<Hop>,
    pub status: PacketStatus,
    pub created_at: u64,
    pub delivered_at: Option<u64>,
    pub accumulated_delay_s: f64,
    pub location: NodeId,
    /// View version seen when the packet was buffered.
    pub buffered_version: u64,
    /// Product of per-hop forwarding probabilities so far.
    pub path_success: f64,
}

impl Packet {
    pub fn new(id: usize, source: NodeId, sink: NodeId, tick: u64) -> Packet {
        Packet {
            id,
            source,
            sink,
            hop_trace: vec![Hop { node: source, tick, delay_s: 0.0 }],
            status: PacketStatus::InFlight,
            created_at: tick,
            delivered_at: None,
            accumulated_delay_s: 0.0,
            location: source,
            buffered_version: 0,
            path_success: 1.0,
        }
    }

    pub fn hops(&self) -> usize {
        self.hop_trace.len() - 1
    }

    pub fn visited(&self, node: NodeId) -> bool {
        self.hop_trace.iter().any(|h| h.node == node)
    }

    pub fn path(&self) -> Vec<NodeId> {
        self.hop_trace.iter().map(|h| h.node).collect()
    }

    pub fn hop_delays(&self) -> Vec<f64> {
        self.hop_trace.iter().skip(1).map(|h| h.delay_s).collect()
    }

    pub(crate) fn advance(&mut self, to: NodeId, tick: u64, delay_s: f64) {
        self.hop_trace.push(Hop { node: to, tick, delay_s });
        self.accumulated_delay_s += delay_s;
        self.location = to;
    }
}

/// Sent by a node to its CA when a chosen next hop turned out unreachable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterruptRequest {
    pub requester: NodeId,
    pub unreachable_next_hop: NodeId,
    pub packet_ids: Vec<usize>,
    pub issued_at: u64,
    pub ca: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatusCounts {
    pub created: usize,
    pub in_flight: usize,
    pub buffered: usize,
    pub delivered: usize,
    pub orphaned: usize,
    pub dropped: usize,
}

impl StatusCounts {
    pub fn of(packets: &[Packet]) -> StatusCounts {
        let mut c = StatusCounts { created: packets.len(), ..Default::default() };
        for p in packets {
            match p.status {
                PacketStatus::InFlight => c.in_flight += 1,
                PacketStatus::BufferedPending => c.buffered += 1,
                PacketStatus::Delivered => c.delivered += 1,
                PacketStatus::Orphaned => c.orphaned += 1,
                PacketStatus::Dropped => c.dropped += 1,
            }
        }
        c
    }

    pub fn conserved(&self) -> bool {
        self.created == self.in_flight + self.buffered + self.delivered + self.orphaned + self.dropped
    }
}
