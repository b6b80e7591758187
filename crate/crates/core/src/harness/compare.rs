use std::fmt;

use super::stats::Summary;
use crate::error::{Error, Result};
use crate::marl::Algorithm;

/// Relative gap below which two means count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering3 {
    Less,
    Tie,
    Greater,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseOrdering {
    pub metric: &'static str,
    pub first: Algorithm,
    pub second: Algorithm,
    pub first_value: f64,
    pub second_value: f64,
    pub relation: Ordering3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub scenario: String,
    pub pairs: Vec<PairwiseOrdering>,
    /// Mean delay is non-decreasing along ma_mappo_i, ma_mappo, mappo (over those present).
    pub delay_ordering_holds: bool,
    pub ticks_ordering_holds: bool,
    pub notes: Vec<String>,
}

fn relation(a: f64, b: f64) -> Ordering3 {
    if (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0) {
        Ordering3::Tie
    } else if a < b {
        Ordering3::Less
    } else {
        Ordering3::Greater
    }
}

/// Pairwise orderings of mean delay and total ticks in expected-best-first order.
pub fn compare_algorithms(summaries: &[Summary]) -> Result<CompareReport> {
    if summaries.len() < 2 {
        return Err(Error::Config("comparison needs at least two algorithm summaries".into()));
    }
    let scenario = summaries[0].scenario.clone();
    if let Some(other) = summaries.iter().find(|s| s.scenario != scenario) {
        return Err(Error::Config(format!("mismatched scenarios: {scenario} vs {}", other.scenario)));
    }
    let mut ordered: Vec<&Summary> = Vec::new();
    for alg in [Algorithm::MaMappoI, Algorithm::MaMappo, Algorithm::Mappo] {
        match summaries.iter().filter(|s| s.algorithm == alg).count() {
            0 => {}
            1 => ordered.push(summaries.iter().find(|s| s.algorithm == alg).expect("counted")),
            _ => return Err(Error::Config(format!("{alg} appears in more than one summary"))),
        }
    }
    let mut pairs = Vec::new();
    let mut notes = Vec::new();
    let mut holds = [true, true];
    for (m, metric) in ["mean_delay_s", "total_ticks"].into_iter().enumerate() {
        let value = |s: &Summary| if m == 0 { s.mean_delay_s } else { s.total_ticks };
        for i in 0..ordered.len() {
            for j in (i + 1)..ordered.len() {
                let (a, b) = (ordered[i], ordered[j]);
                let rel = relation(value(a), value(b));
                for s in [a, b].into_iter().filter(|s| value(s).is_nan()) {
                    let note = format!("{metric} undefined for {}: a run delivered nothing", s.algorithm);
                    if !notes.contains(&note) {
                        notes.push(note);
                    }
                }
                if rel == Ordering3::Tie {
                    notes.push(format!("tie on {metric}: {} = {}", a.algorithm, b.algorithm));
                }
                if j == i + 1 && (rel == Ordering3::Greater || value(a).is_nan() || value(b).is_nan()) {
                    holds[m] = false;
                }
                pairs.push(PairwiseOrdering {
                    metric,
                    first: a.algorithm,
                    second: b.algorithm,
                    first_value: value(a),
                    second_value: value(b),
                    relation: rel,
                });
            }
        }
    }
    Ok(CompareReport { scenario, pairs, delay_ordering_holds: holds[0], ticks_ordering_holds: holds[1], notes })
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.scenario)?;
        for p in &self.pairs {
            let sym = match p.relation {
                Ordering3::Less => "<",
                Ordering3::Tie => "=",
                Ordering3::Greater => ">",
            };
            writeln!(f, "{}: {} {} {} ({} vs {})", p.metric, p.first, sym, p.second, p.first_value, p.second_value)?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        writeln!(f, "delay_ordering_holds={}", self.delay_ordering_holds)?;
        write!(f, "ticks_ordering_holds={}", self.ticks_ordering_holds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(alg: Algorithm, delay: f64, scenario: &str) -> Summary {
        Summary {
            algorithm: alg,
            scenario: scenario.into(),
            runs: 5,
            mean_delay_s: delay,
            mean_delay_ci95: 0.0,
            delivery_ratio: 1.0,
            delivery_ratio_ci95: 0.0,
            total_ticks: 100.0,
            total_ticks_ci95: 0.0,
            final_decile_reward: 0.0,
            final_decile_reward_ci95: 0.0,
        }
    }

    fn three(d: [f64; 3]) -> Vec<Summary> {
        vec![
            summary(Algorithm::Mappo, d[2], "s"),
            summary(Algorithm::MaMappo, d[1], "s"),
            summary(Algorithm::MaMappoI, d[0], "s"),
        ]
    }

    #[test]
    fn reference_means_hold() {
        let r = compare_algorithms(&three([9.21, 9.30, 11.13])).unwrap();
        assert!(r.delay_ordering_holds);
        assert_eq!(r.pairs.iter().filter(|p| p.metric == "mean_delay_s").count(), 3);
    }

    #[test]
    fn ties_are_annotated() {
        let r = compare_algorithms(&three([10.0, 10.0, 10.0])).unwrap();
        assert!(r.delay_ordering_holds);
        assert!(r.notes.iter().any(|n| n.contains("tie on mean_delay_s")));
    }

    #[test]
    fn inversion_is_reported() {
        let r = compare_algorithms(&three([11.13, 9.30, 9.21])).unwrap();
        assert!(!r.delay_ordering_holds);
        assert!(r.to_string().contains("delay_ordering_holds=false"));
    }

    #[test]
    fn mismatched_scenarios_fail() {
        let mut s = three([1.0, 2.0, 3.0]);
        s[0].scenario = "other".into();
        assert!(compare_algorithms(&s).is_err());
        assert!(compare_algorithms(&s[..1]).is_err());
    }
}
