//! Per-decision reward family: forwarding, noise, hop and delay terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub chi: f64,
    pub varsigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    /// SNR (dB) at which the forwarding probability is one half.
    pub snr_midpoint_db: f64,
    /// Logistic slope of the forwarding probability, per dB.
    pub snr_slope_per_db: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            theta1: 0.4,
            theta2: 0.2,
            theta3: 0.2,
            theta4: 0.2,
            gamma1: 1.0,
            gamma2: 1.0,
            chi: 0.01,
            varsigma: 1.0,
            alpha: 1.0,
            beta: 1.0,
            omega: 1.0,
            snr_midpoint_db: 10.0,
            snr_slope_per_db: 0.5,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.theta1, self.theta2, self.theta3, self.theta4, self.gamma1, self.gamma2, self.chi, self.varsigma,
            self.alpha, self.beta, self.omega, self.snr_midpoint_db, self.snr_slope_per_db,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("reward weights must be finite".into()));
        }
        let non_negative = [self.theta1, self.theta2, self.theta3, self.theta4, self.gamma1, self.gamma2, self.chi, self.varsigma];
        if non_negative.iter().any(|&v| v < 0.0) {
            return Err(Error::Config("theta, gamma, chi and varsigma must be non-negative".into()));
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(Error::Config("alpha and beta must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::Config("omega must lie in [0,1]".into()));
        }
        Ok(())
    }

    /// Forwarding probability of a link with the given SNR.
    pub fn p_forward(&self, snr_db: f64) -> f64 {
        1.0 / (1.0 + (-self.snr_slope_per_db * (snr_db - self.snr_midpoint_db)).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopOutcome {
    Success,
    Loss,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {p} is not a probability")))
    }
}

pub fn forwarding_reward(outcome: HopOutcome, p_forward: f64, p_loss: f64, w: &RewardWeights) -> Result<f64> {
    check_probability("p_forward", p_forward)?;
    check_probability("p_loss", p_loss)?;
    Ok(match outcome {
        HopOutcome::Success => w.gamma1 * p_forward.sqrt(),
        HopOutcome::Loss => -w.gamma2 * p_loss.sqrt(),
    })
}

/// Noise penalty; negative levels are floored at 0 dB.
pub fn noise_reward(spl_total_db: f64, chi: f64, varsigma: f64) -> f64 {
    if chi == 0.0 {
        return 0.0;
    }
    -chi * spl_total_db.max(0.0).powf(varsigma)
}

pub fn hop_reward(hops: u32, alpha: f64, beta: f64) -> f64 {
    alpha / (beta + hops as f64)
}

/// Delay term; `t_delay` is clamped into `[t_min, t_max]`.
pub fn delay_reward(t_delay: f64, t_min: f64, t_max: f64, omega: f64) -> Result<f64> {
    if t_max.is_nan() || t_min.is_nan() || t_max <= t_min {
        return Err(Error::Domain(format!("delay range [{t_min}, {t_max}] is empty")));
    }
    let t = t_delay.clamp(t_min, t_max);
    Ok(omega - (t - t_min) / (t_max - t_min))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub forwarding: f64,
    pub noise: f64,
    pub hop: f64,
    pub delay: f64,
}

pub fn total_reward(c: &RewardComponents, w: &RewardWeights) -> f64 {
    w.theta1 * c.forwarding + w.theta2 * c.noise + w.theta3 * c.hop + w.theta4 * c.delay
}
