//! The actor: per-candidate logits, optional attention scores, masked policy.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::{AttentionScorer, ScorerCache, TOKEN_DIM};
use crate::nn::{prefixed, softmax, Mlp, MlpCache, Parameters, Tensor};

/// Candidate feature width: the attention token, then sink progress, is-sink,
/// distance to sink and the packet's hop fraction.
pub const CANDIDATE_DIM: usize = TOKEN_DIM + 4;

/// Renormalize `softmax(logits)` over the unmasked actions. Masked entries are exactly 0.
pub fn masked_policy(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::Shape(format!("{} logits vs {} mask entries", logits.len(), mask.len())));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::State("every action is masked".into()));
    }
    let peak = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().zip(mask).map(|(&z, &m)| if m { (z - peak).exp() } else { 0.0 }).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Sample an index from a probability vector by inverse CDF.
pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_valid = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_valid = k;
            if u < acc {
                return k;
            }
        }
    }
    last_valid
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    /// Per-candidate logit network.
    pub body: Mlp,
    /// Attention scorer; present for the masked variants.
    pub scorer: Option<AttentionScorer>,
}

#[derive(Debug, Clone)]
pub struct ActorForward {
    pub logits: Vec<f64>,
    /// Attention score vector `M_t`, when a scorer is present.
    pub scores: Option<Vec<f64>>,
    body_cache: MlpCache,
    scorer_cache: Option<ScorerCache>,
}

impl Actor {
    pub fn new(hidden: usize, with_scorer: bool, rng: &mut impl Rng) -> Actor {
        let body = Mlp::new(&[CANDIDATE_DIM, hidden, 1], rng);
        let scorer = with_scorer.then(|| AttentionScorer::new(TOKEN_DIM, rng));
        Actor { body, scorer }
    }

    pub fn zeros_like(&self) -> Actor {
        Actor { body: self.body.zeros_like(), scorer: self.scorer.as_ref().map(|s| s.zeros_like()) }
    }

    /// Logits `g(x_j) + h_j` where `h` is the scorer's raw output.
    pub fn forward(&self, candidates: ArrayView2<f64>) -> Result<ActorForward> {
        if candidates.ncols() != CANDIDATE_DIM || candidates.nrows() == 0 {
            return Err(Error::Shape(format!("actor expects n×{CANDIDATE_DIM} candidates, got {:?}", candidates.dim())));
        }
        let body_cache = self.body.forward_cached(candidates)?;
        let mut logits = body_cache.output.column(0).to_vec();
        let (scores, scorer_cache) = match &self.scorer {
            Some(scorer) => {
                let cache = scorer.forward_cached(candidates.slice(s![.., ..TOKEN_DIM]))?;
                logits.iter_mut().zip(&cache.logits).for_each(|(z, h)| *z += h);
                (Some(softmax(&cache.logits)), Some(cache))
            }
            None => (None, None),
        };
        Ok(ActorForward { logits, scores, body_cache, scorer_cache })
    }

    pub fn backward(&self, fwd: &ActorForward, d_logits: &[f64]) -> Result<Actor> {
        let upstream = Array2::from_shape_vec((d_logits.len(), 1), d_logits.to_vec())
            .map_err(|e| Error::Shape(e.to_string()))?;
        let (body, _) = self.body.backward(&fwd.body_cache, upstream.view())?;
        let scorer = match (&self.scorer, &fwd.scorer_cache) {
            (Some(s), Some(cache)) => Some(s.backward(cache, d_logits)?),
            _ => None,
        };
        Ok(Actor { body, scorer })
    }
}

impl Parameters for Actor {
    fn tensors(&self) -> Vec<Tensor<'_>> {
        let mut out = prefixed("body", self.body.tensors());
        if let Some(s) = &self.scorer {
            out.extend(prefixed("scorer", s.tensors()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.body.tensors_mut();
        if let Some(s) = &mut self.scorer {
            out.extend(s.tensors_mut());
        }
        out
    }
}
