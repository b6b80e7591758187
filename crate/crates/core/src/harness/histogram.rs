use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference edges in seconds for the 64-node scenario.
pub const REFERENCE_EDGES_S: [f64; 5] = [0.0, 9.0, 12.0, 15.0, 18.0];

/// Delay buckets `[e_k, e_{k+1})`; the last edge may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Count fractions; all zero when `empty`.
    pub proportions: Vec<f64>,
    pub empty: bool,
}

/// Reference edges scaled by the cube root of the node-count ratio, open-ended.
pub fn default_edges(node_count: usize) -> Vec<f64> {
    let scale = (node_count.max(64) as f64 / 64.0).cbrt();
    let mut edges: Vec<f64> = REFERENCE_EDGES_S.iter().map(|e| e * scale).collect();
    edges.push(f64::INFINITY);
    edges
}

pub fn histogram(delays: &[f64], edges: &[f64]) -> Result<Histogram> {
    if edges.len() < 2 {
        return Err(Error::Config("a histogram needs at least two edges".into()));
    }
    if edges.iter().any(|e| e.is_nan()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("histogram edges must increase strictly: {edges:?}")));
    }
    let mut counts = vec![0; edges.len() - 1];
    for &d in delays {
        if !d.is_finite() {
            return Err(Error::NonFinite(format!("delay {d}")));
        }
        // Values outside the edge range land in the nearest end bucket.
        let k = edges[1..].partition_point(|&e| e <= d).min(counts.len() - 1);
        counts[k] += 1;
    }
    let total: usize = counts.iter().sum();
    let proportions = counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect();
    Ok(Histogram { edges: edges.to_vec(), counts, proportions, empty: total == 0 })
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lower_s,upper_s,count,proportion,empty\n");
        for (k, (&c, &p)) in self.counts.iter().zip(&self.proportions).enumerate() {
            out.push_str(&format!("{},{},{c},{p},{}\n", self.edges[k], self.edges[k + 1], self.empty));
        }
        out
    }
}

/// Parse a comma-separated edge list; `inf` is accepted for the open end.
pub fn parse_edges(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|_| Error::Parse(format!("bad histogram edge {t:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_in_first_bucket() {
        let h = histogram(&[1.0, 2.0, 8.99], &default_edges(64)).unwrap();
        assert_eq!(h.proportions, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_is_flagged() {
        let h = histogram(&[], &default_edges(64)).unwrap();
        assert!(h.empty);
        assert_eq!(h.counts, vec![0; 5]);
    }

    #[test]
    fn hand_tally() {
        let delays = [0.5, 9.0, 9.5, 11.99, 12.0, 14.0, 15.0, 17.9, 18.0, 40.0];
        let h = histogram(&delays, &default_edges(64)).unwrap();
        assert_eq!(h.counts, vec![1, 3, 2, 2, 2]);
    }

    #[test]
    fn rejects_non_monotone_edges() {
        assert!(histogram(&[1.0], &[0.0, 5.0, 5.0]).is_err());
        assert!(histogram(&[1.0], &[0.0, 9.0, 3.0]).is_err());
        assert!(histogram(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn edges_scale_with_size() {
        assert_eq!(default_edges(64)[..5], REFERENCE_EDGES_S);
        assert!(default_edges(125)[1] > 9.0 && default_edges(216)[1] > default_edges(125)[1]);
        assert_eq!(parse_edges("0, 9,inf").unwrap(), vec![0.0, 9.0, f64::INFINITY]);
    }

    proptest! {
        #[test]
        fn proportions_sum_to_one(delays in prop::collection::vec(0.0f64..60.0, 1..200)) {
            let h = histogram(&delays, &default_edges(125)).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<usize>(), delays.len());
            prop_assert!((h.proportions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
