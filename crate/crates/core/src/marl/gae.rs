use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GaeOutput {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Generalized advantage estimation over one sequence.
///
/// `bootstrap` is the value of the state after the last step; it is ignored
/// when that step is terminal. A `done` flag cuts bootstrapping at that step.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<GaeOutput> {
    let n = rewards.len();
    if n == 0 {
        return Err(Error::Shape("advantage estimation over an empty sequence".into()));
    }
    if values.len() != n || dones.len() != n {
        return Err(Error::Shape(format!("{n} rewards, {} values, {} dones", values.len(), dones.len())));
    }
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(GaeOutput { advantages, returns })
}

/// Shift and scale to zero mean and unit variance (no-op scale for constant input).
pub fn normalize_advantages(advantages: &mut [f64]) {
    if advantages.is_empty() {
        return;
    }
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in advantages.iter_mut() {
        *a = if std > 1e-12 { (*a - mean) / std } else { *a - mean };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [1.0, 0.5, -0.2, 0.3];
        let v = [0.2, 0.4, 0.1, 0.6];
        let out = gae_advantages(&r, &v, &[false; 4], 0.7, 0.9, 0.0).unwrap();
        for t in 0..4 {
            let next = if t < 3 { v[t + 1] } else { 0.7 };
            assert_abs_diff_eq!(out.advantages[t], r[t] + 0.9 * next - v[t], epsilon = 1e-12);
        }
    }

    #[test]
    fn lambda_one_is_monte_carlo() {
        let r = [1.0, 0.5, -0.2, 0.3];
        let v = [0.2, 0.4, 0.1, 0.6];
        let g = 0.95;
        let out = gae_advantages(&r, &v, &[false, false, false, true], 99.0, g, 1.0).unwrap();
        for t in 0..4 {
            let ret: f64 = (t..4).map(|k| g.powi((k - t) as i32) * r[k]).sum();
            assert_abs_diff_eq!(out.advantages[t], ret - v[t], epsilon = 1e-12);
            assert_abs_diff_eq!(out.returns[t], ret, epsilon = 1e-12);
        }
    }

    #[test]
    fn three_step_hand_unrolled() {
        let (g, l) = (0.95, 0.9);
        let r = [1.0, 0.0, 2.0];
        let v = [0.5, 1.0, 1.5];
        // Terminal at the end.
        let d2 = 2.0 - 1.5;
        let d1 = 0.0 + g * 1.5 - 1.0;
        let d0 = 1.0 + g * 1.0 - 0.5;
        let a2 = d2;
        let a1 = d1 + g * l * a2;
        let a0 = d0 + g * l * a1;
        let out = gae_advantages(&r, &v, &[false, false, true], 0.0, g, l).unwrap();
        assert_abs_diff_eq!(out.advantages[0], a0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.advantages[1], a1, epsilon = 1e-12);
        assert_abs_diff_eq!(out.advantages[2], a2, epsilon = 1e-12);
    }

    #[test]
    fn errors_and_normalization() {
        assert!(gae_advantages(&[], &[], &[], 0.0, 0.9, 0.9).is_err());
        assert!(gae_advantages(&[1.0], &[1.0, 2.0], &[true], 0.0, 0.9, 0.9).is_err());
        let mut a = vec![1.0, 2.0, 3.0, 6.0];
        normalize_advantages(&mut a);
        let mean: f64 = a.iter().sum::<f64>() / 4.0;
        let var: f64 = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-12);
    }
}
