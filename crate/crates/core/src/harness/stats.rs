use statrs::distribution::{ContinuousCDF, StudentsT};

use super::RunResult;
use crate::error::{Error, Result};
use crate::marl::Algorithm;

/// Arithmetic mean in slice order; NaN for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Half-width of the two-sided 95% Student-t interval; NaN below two samples.
pub fn student_t_half_width(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n ≥ 2").inverse_cdf(0.975);
    t * (var / n as f64).sqrt()
}

/// Across-seed aggregate for one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub scenario: String,
    pub runs: usize,
    pub mean_delay_s: f64,
    pub mean_delay_ci95: f64,
    pub delivery_ratio: f64,
    pub delivery_ratio_ci95: f64,
    pub total_ticks: f64,
    pub total_ticks_ci95: f64,
    pub final_decile_reward: f64,
    pub final_decile_reward_ci95: f64,
}

pub fn summarize(algorithm: Algorithm, scenario: &str, runs: &[&RunResult]) -> Summary {
    let pick = |f: &dyn Fn(&RunResult) -> f64| -> Vec<f64> { runs.iter().map(|r| f(r)).collect() };
    let delay = pick(&|r| r.task.metrics.mean_delay_s);
    let ratio = pick(&|r| r.task.metrics.delivery_ratio);
    let ticks = pick(&|r| r.task.metrics.total_ticks as f64);
    let reward = pick(&|r| r.decile_rewards().1);
    Summary {
        algorithm,
        scenario: scenario.to_string(),
        runs: runs.len(),
        mean_delay_s: mean(&delay),
        mean_delay_ci95: student_t_half_width(&delay),
        delivery_ratio: mean(&ratio),
        delivery_ratio_ci95: student_t_half_width(&ratio),
        total_ticks: mean(&ticks),
        total_ticks_ci95: student_t_half_width(&ticks),
        final_decile_reward: mean(&reward),
        final_decile_reward_ci95: student_t_half_width(&reward),
    }
}

impl Summary {
    pub fn to_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.scenario,
            self.runs,
            self.mean_delay_s,
            self.mean_delay_ci95,
            self.delivery_ratio,
            self.delivery_ratio_ci95,
            self.total_ticks,
            self.total_ticks_ci95,
            self.final_decile_reward,
            self.final_decile_reward_ci95
        )
    }

    pub fn from_row(line: &str) -> Result<Summary> {
        let cells: Vec<&str> = line.trim().split(',').collect();
        if cells.len() != 11 {
            return Err(Error::Parse(format!("summary row has {} cells, expected 11", cells.len())));
        }
        let num = |k: usize| -> Result<f64> {
            cells[k].parse().map_err(|_| Error::Parse(format!("bad number {:?} in summary row", cells[k])))
        };
        Ok(Summary {
            algorithm: cells[0].parse()?,
            scenario: cells[1].to_string(),
            runs: cells[2].parse().map_err(|_| Error::Parse(format!("bad run count {:?}", cells[2])))?,
            mean_delay_s: num(3)?,
            mean_delay_ci95: num(4)?,
            delivery_ratio: num(5)?,
            delivery_ratio_ci95: num(6)?,
            total_ticks: num(7)?,
            total_ticks_ci95: num(8)?,
            final_decile_reward: num(9)?,
            final_decile_reward_ci95: num(10)?,
        })
    }
}
