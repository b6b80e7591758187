//! Reachability indicators, attention-based action scores, threshold masks
//! and the versioned network views kept by CA nodes.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    prefixed, softmax, softmax_backward, AttentionCache, Dense, Mlp, MlpCache, MultiHeadAttention, Parameters, Tensor,
};
use crate::ocean::{NodeId, Role, World};

/// Width of a candidate token: five indicators, receiver noise and sender noise.
pub const TOKEN_DIM: usize = 7;
pub const HEAD_COUNT: usize = 4;
pub const KEY_DIM: usize = 16;
/// Scorer logits are squashed into `(-LOGIT_BOUND, LOGIT_BOUND)`, so the mask
/// can single out weak candidates but never collapse onto one.
pub const LOGIT_BOUND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorVector {
    pub i_geo: f64,
    pub i_signal: f64,
    pub i_bandwidth: f64,
    pub i_energy: f64,
    pub i_success: f64,
}

impl IndicatorVector {
    pub fn to_array(self) -> [f64; 5] {
        [self.i_geo, self.i_signal, self.i_bandwidth, self.i_energy, self.i_success]
    }
}

/// `(x − lo)/(hi − lo)` clamped to [0,1]; a degenerate range yields 1.
fn normalize(x: f64, lo: f64, hi: f64) -> f64 {
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        1.0
    } else {
        ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

pub fn compute_indicators(world: &World, i: NodeId, j: NodeId) -> Result<IndicatorVector> {
    let metrics = world.link_metrics(i, j)?;
    let norms = world.normalizers();
    let energy = world.nodes[i].energy.min(world.nodes[j].energy);
    Ok(IndicatorVector {
        i_geo: (1.0 - metrics.distance_m / norms.d_max).clamp(0.0, 1.0),
        i_signal: normalize(metrics.signal_strength_db, norms.s_min, norms.s_max),
        i_bandwidth: normalize(metrics.bandwidth, norms.b_min, norms.b_max),
        i_energy: normalize(energy, norms.e_min, norms.e_max),
        i_success: metrics.success_history.clamp(0.0, 1.0),
    })
}

/// Noise level mapped to roughly [0,1] over the usual 70–90 dB band.
pub fn spl_feature(spl_db: f64) -> f64 {
    (spl_db - 70.0) / 20.0
}

/// Progress toward the sink of hop `i → j`, in units of the acoustic range.
pub fn sink_progress(world: &World, i: NodeId, j: NodeId) -> f64 {
    (world.distance(i, world.sink) - world.distance(j, world.sink)) / world.comm_range_m
}

/// One token per candidate: link indicators plus the noise at both ends.
///
/// Tokens carry no sink direction, so scores judge link quality only.
pub fn candidate_tokens(world: &World, i: NodeId, candidates: &[NodeId]) -> Result<Array2<f64>> {
    let mut tokens = Array2::zeros((candidates.len(), TOKEN_DIM));
    let local_noise = spl_feature(world.node(i)?.spl_total_db);
    for (row, &j) in candidates.iter().enumerate() {
        let ind = compute_indicators(world, i, j)?.to_array();
        let mut t = tokens.row_mut(row);
        for (k, v) in ind.into_iter().enumerate() {
            t[k] = v;
        }
        t[5] = spl_feature(world.nodes[j].spl_total_db);
        t[6] = local_noise;
    }
    Ok(tokens)
}

/// Candidates as a token sequence, self-attention, tanh, bounded scalar head.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionScorer {
    pub attention: MultiHeadAttention,
    pub head: Dense,
}

#[derive(Debug, Clone)]
pub struct ScorerCache {
    attention: AttentionCache,
    hidden: Array2<f64>,
    head: MlpCache,
    /// Bounded per-candidate logits before the softmax.
    pub logits: Vec<f64>,
}

impl AttentionScorer {
    /// The scalar head starts at zero so untrained scores are uniform.
    pub fn new(token_dim: usize, rng: &mut impl Rng) -> AttentionScorer {
        AttentionScorer {
            attention: MultiHeadAttention::new(token_dim, HEAD_COUNT, KEY_DIM, rng),
            head: Dense::zeros(HEAD_COUNT * KEY_DIM, 1),
        }
    }

    pub fn zeros_like(&self) -> AttentionScorer {
        AttentionScorer {
            attention: self.attention.zeros_like(),
            head: Dense::zeros(self.head.input_dim(), 1),
        }
    }

    pub fn forward_cached(&self, tokens: ArrayView2<f64>) -> Result<ScorerCache> {
        if tokens.nrows() == 0 {
            return Err(Error::Shape("attention scores need at least one candidate".into()));
        }
        let attention = self.attention.forward_cached(tokens, tokens, tokens)?;
        let hidden = attention.output.mapv(f64::tanh);
        let head = Mlp { layers: vec![self.head.clone()] };
        let head_cache = head.forward_cached(hidden.view())?;
        let logits = head_cache.output.column(0).iter().map(|&r| LOGIT_BOUND * (r / LOGIT_BOUND).tanh()).collect();
        Ok(ScorerCache { attention, hidden, head: head_cache, logits })
    }

    /// Score vector `M_t`: softmax over candidate logits.
    pub fn scores(&self, tokens: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward_cached(tokens)?.logits))
    }

    /// Gradients given `∂L/∂logits`.
    pub fn backward(&self, cache: &ScorerCache, d_logits: &[f64]) -> Result<AttentionScorer> {
        if d_logits.len() != cache.logits.len() {
            return Err(Error::Shape(format!("{} logit gradients for {} candidates", d_logits.len(), cache.logits.len())));
        }
        let d_raw: Vec<f64> = d_logits.iter().zip(&cache.logits).map(|(g, z)| g * (1.0 - (z / LOGIT_BOUND).powi(2))).collect();
        let upstream = Array2::from_shape_vec((d_raw.len(), 1), d_raw).map_err(|e| Error::Shape(e.to_string()))?;
        let head = Mlp { layers: vec![self.head.clone()] };
        let (head_grad, mut d_hidden) = head.backward(&cache.head, upstream.view())?;
        d_hidden.zip_mut_with(&cache.hidden, |g, h| *g *= 1.0 - h * h);
        let (att_grad, _) = self.attention.backward(&cache.attention, d_hidden.view())?;
        Ok(AttentionScorer {
            attention: att_grad,
            head: head_grad.layers.into_iter().next().expect("one layer"),
        })
    }

    /// Gradients given `∂L/∂M_t` (through the softmax).
    pub fn backward_scores(&self, cache: &ScorerCache, d_scores: &[f64]) -> Result<AttentionScorer> {
        let p = softmax(&cache.logits);
        self.backward(cache, &softmax_backward(&p, d_scores))
    }
}

impl Parameters for AttentionScorer {
    fn tensors(&self) -> Vec<Tensor<'_>> {
        let mut out = prefixed("attention", self.attention.tensors());
        out.extend(prefixed("head", self.head.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.attention.tensors_mut();
        out.extend(self.head.tensors_mut());
        out
    }
}

/// Threshold `τ` applied to score vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskThreshold {
    /// Half the uniform probability, `0.5/|A|`.
    #[default]
    HalfUniform,
    Fixed(f64),
}

impl MaskThreshold {
    pub fn resolve(self, action_count: usize) -> f64 {
        match self {
            MaskThreshold::HalfUniform => 0.5 / action_count.max(1) as f64,
            MaskThreshold::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMask {
    pub scores: Vec<f64>,
    pub binary: Vec<bool>,
    pub threshold: f64,
    /// Set when nothing cleared the threshold and the argmax was unmasked.
    pub fallback: bool,
}

impl ActionMask {
    /// Indices of unmasked actions (the valid action set).
    pub fn valid_actions(&self) -> Vec<usize> {
        self.binary.iter().enumerate().filter(|(_, &b)| b).map(|(a, _)| a).collect()
    }

    pub fn masked_count(&self) -> usize {
        self.binary.iter().filter(|&&b| !b).count()
    }

    pub fn all_valid(len: usize) -> ActionMask {
        ActionMask { scores: vec![1.0 / len.max(1) as f64; len], binary: vec![true; len], threshold: 0.0, fallback: false }
    }
}

/// Keep actions whose score reaches `tau`; if none does, keep the argmax.
pub fn apply_mask(scores: &[f64], tau: f64) -> ActionMask {
    let mut binary: Vec<bool> = scores.iter().map(|&s| s >= tau).collect();
    let mut fallback = false;
    if !scores.is_empty() && !binary.iter().any(|&b| b) {
        let best = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k)
            .expect("non-empty");
        binary[best] = true;
        fallback = true;
    }
    ActionMask { scores: scores.to_vec(), binary, threshold: tau, fallback }
}

/// Alive nodes currently within range of `i`.
pub fn live_neighbors(world: &World, i: NodeId) -> Vec<NodeId> {
    (0..world.len()).filter(|&j| world.physically_reachable(i, j)).collect()
}

/// Learned-and-physical reachability of `i`'s live neighbors.
pub fn node_reachability(world: &World, i: NodeId, scorer: &AttentionScorer, tau: MaskThreshold) -> Result<Vec<(NodeId, bool)>> {
    Ok(node_margins(world, i, scorer, tau)?.into_iter().map(|(j, m)| (j, m >= 1.0)).collect())
}

/// Score over threshold for each live neighbor of `i`; at least 1 means kept.
fn node_margins(world: &World, i: NodeId, scorer: &AttentionScorer, tau: MaskThreshold) -> Result<Vec<(NodeId, f64)>> {
    world.node(i)?;
    if !world.is_alive(i) {
        return Ok(Vec::new());
    }
    let neighbors = live_neighbors(world, i);
    if neighbors.is_empty() {
        return Ok(Vec::new());
    }
    let tokens = candidate_tokens(world, i, &neighbors)?;
    let scores = scorer.scores(tokens.view())?;
    let threshold = tau.resolve(neighbors.len());
    Ok(neighbors
        .into_iter()
        .zip(scores)
        .map(|(j, s)| (j, if threshold > 0.0 { s / threshold } else { f64::INFINITY }))
        .collect())
}

/// Pairwise mask: learned score clears `tau`, within range, both alive.
pub fn assess_reachability(world: &World, i: NodeId, j: NodeId, scorer: &AttentionScorer, tau: MaskThreshold) -> Result<bool> {
    world.node(j)?;
    if i == j || !world.physically_reachable(i, j) {
        world.node(i)?;
        return Ok(false);
    }
    Ok(node_reachability(world, i, scorer, tau)?
        .into_iter()
        .any(|(k, ok)| k == j && ok))
}

/// A CA's reachability matrix over its members and their border neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkView {
    pub ca: NodeId,
    pub version: u64,
    pub updated_at: u64,
    /// Sorted node ids indexing the matrix.
    pub nodes: Vec<NodeId>,
    pub reachability: Vec<Vec<bool>>,
}

impl NetworkView {
    pub fn new(ca: NodeId) -> NetworkView {
        NetworkView { ca, version: 0, updated_at: 0, nodes: Vec::new(), reachability: Vec::new() }
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.nodes.binary_search(&id).ok()
    }

    pub fn reachable(&self, i: NodeId, j: NodeId) -> bool {
        match (self.index_of(i), self.index_of(j)) {
            (Some(a), Some(b)) => self.reachability[a][b],
            _ => false,
        }
    }

    /// Nodes the view marks reachable from `i`.
    pub fn reachable_from(&self, i: NodeId) -> Vec<NodeId> {
        match self.index_of(i) {
            Some(a) => self
                .nodes
                .iter()
                .zip(&self.reachability[a])
                .filter(|(_, &r)| r)
                .map(|(&j, _)| j)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<NetworkView> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Rebuild the view of the CA heading `view.ca`'s subnet and bump its version.
pub fn update_network_view(
    world: &World,
    view: &mut NetworkView,
    scorer: &AttentionScorer,
    tau: MaskThreshold,
    now: u64,
) -> Result<()> {
    let ca = view.ca;
    if world.node(ca)?.role != Role::Ca {
        return Err(Error::Config(format!("node {ca} is not a CA")));
    }
    let subnet = world
        .subnet_index_of_ca(ca)
        .ok_or_else(|| Error::Config(format!("CA {ca} heads no subnet")))?;
    let members = &world.subnets[subnet].members;
    let mut nodes: Vec<NodeId> = members.clone();
    for &m in members {
        nodes.extend((0..world.len()).filter(|&j| world.in_range(m, j)));
    }
    nodes.sort_unstable();
    nodes.dedup();

    let n = nodes.len();
    let mut margin = vec![vec![None; n]; n];
    for (a, &i) in nodes.iter().enumerate() {
        for (j, m) in node_margins(world, i, scorer, tau)? {
            if let Ok(b) = nodes.binary_search(&j) {
                margin[a][b] = Some(m);
            }
        }
    }
    let mutual = |a: usize, b: usize| -> Option<f64> { Some(margin[a][b]?.min(margin[b][a]?)) };
    let mut reachability = vec![vec![false; n]; n];
    for a in 0..n {
        for b in 0..n {
            reachability[a][b] = a != b && mutual(a, b).is_some_and(|m| m >= 1.0);
        }
    }
    // A live node left without links keeps its strongest mutual one.
    for a in 0..n {
        if reachability[a].iter().any(|&r| r) {
            continue;
        }
        let best = (0..n)
            .filter(|&b| b != a)
            .filter_map(|b| mutual(a, b).map(|m| (b, m)))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
        if let Some((b, _)) = best {
            reachability[a][b] = true;
            reachability[b][a] = true;
        }
    }
    view.nodes = nodes;
    view.reachability = reachability;
    view.version += 1;
    view.updated_at = now;
    Ok(())
}
