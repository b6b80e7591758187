//! Closed-form ambient noise source levels for underwater acoustic links and
//! their aggregation in the decibel domain.
//!
//! All levels are in dB. Frequencies are in Hz; speeds are taken in whatever
//! unit the empirical constants were fitted in (vehicle speed is relative to
//! 6.18, wind speed is relative to 10).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.38e-23;

/// Reference power for thermal noise levels: 1 pW.
pub const REFERENCE_POWER_W: f64 = 1e-12;

/// Default turbulence base level, dB.
pub const DEFAULT_TURBULENCE_BASE_DB: f64 = 17.0;

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}

/// Inputs to the four noise source models of a single node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSourceParams {
    pub frequency_hz: f64,
    pub vehicle_speed: f64,
    pub vehicle_density: f64,
    pub temperature_k: f64,
    pub resistance_ohm: f64,
    pub bandwidth_hz: f64,
    pub base_turbulence_db: f64,
    pub turbulence_speed: f64,
    pub wind_speed: f64,
}

impl Default for NoiseSourceParams {
    fn default() -> Self {
        Self {
            frequency_hz: 20_000.0,
            vehicle_speed: 6.18,
            vehicle_density: 0.01,
            temperature_k: 290.0,
            resistance_ohm: 50.0,
            bandwidth_hz: 5_000.0,
            base_turbulence_db: DEFAULT_TURBULENCE_BASE_DB,
            turbulence_speed: 1.0,
            wind_speed: 10.0,
        }
    }
}

impl NoiseSourceParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("frequency_hz", self.frequency_hz)?;
        require_positive("vehicle_speed", self.vehicle_speed)?;
        require_positive("vehicle_density", self.vehicle_density)?;
        require_positive("temperature_k", self.temperature_k)?;
        require_positive("resistance_ohm", self.resistance_ohm)?;
        require_positive("bandwidth_hz", self.bandwidth_hz)?;
        require_positive("turbulence_speed", self.turbulence_speed)?;
        if !(self.wind_speed >= 0.0 && self.wind_speed.is_finite()) {
            return Err(Error::Domain(format!(
                "wind_speed must be non-negative, got {}",
                self.wind_speed
            )));
        }
        if !self.base_turbulence_db.is_finite() {
            return Err(Error::Domain("base_turbulence_db must be finite".into()));
        }
        Ok(())
    }

    /// The four source levels in fixed order: vehicle, thermal, turbulence, storm.
    ///
    /// Calm water (`wind_speed == 0`) contributes no storm source.
    pub fn source_levels(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut levels = vec![
            vehicle_noise(self.frequency_hz, self.vehicle_speed, self.vehicle_density)?,
            thermal_noise(self.temperature_k, self.resistance_ohm, self.bandwidth_hz)?,
            turbulence_noise(self.base_turbulence_db, self.turbulence_speed)?,
        ];
        if self.wind_speed > 0.0 {
            levels.push(storm_noise(self.frequency_hz, self.wind_speed)?);
        }
        Ok(levels)
    }

    pub fn total_db(&self) -> Result<f64> {
        total_spl(&self.source_levels()?)
    }
}

/// Shipping and vehicle noise: `186 − 20·lg f + 6·lg(v_s/6.18) + 10·lg ρ_N`.
pub fn vehicle_noise(frequency_hz: f64, speed: f64, density: f64) -> Result<f64> {
    require_positive("frequency", frequency_hz)?;
    require_positive("vehicle speed", speed)?;
    require_positive("vehicle density", density)?;
    Ok(186.0 - 20.0 * frequency_hz.log10() + 6.0 * (speed / 6.18).log10()
        + 10.0 * density.log10())
}

/// Johnson noise of the receiver front end, `10·lg(4·k_B·T·R·B / P₀)`.
pub fn thermal_noise(temperature_k: f64, resistance_ohm: f64, bandwidth_hz: f64) -> Result<f64> {
    require_positive("temperature", temperature_k)?;
    require_positive("resistance", resistance_ohm)?;
    require_positive("bandwidth", bandwidth_hz)?;
    let spectral_density = 4.0 * BOLTZMANN * temperature_k * resistance_ohm;
    let power = spectral_density * bandwidth_hz;
    Ok(10.0 * (power / REFERENCE_POWER_W).log10())
}

/// Flow noise from turbulence around the node: `SL_base + 20·lg U_turb`.
pub fn turbulence_noise(base_db: f64, turbulence_speed: f64) -> Result<f64> {
    require_positive("turbulence speed", turbulence_speed)?;
    if !base_db.is_finite() {
        return Err(Error::Domain("turbulence base level must be finite".into()));
    }
    Ok(base_db + 20.0 * turbulence_speed.log10())
}

/// Surface agitation noise driven by wind.
pub fn storm_noise(frequency_hz: f64, wind_speed: f64) -> Result<f64> {
    require_positive("frequency", frequency_hz)?;
    require_positive("wind speed", wind_speed)?;
    let knee = (frequency_hz / 400.0).powi(2) + 1.0;
    Ok(55.0 - 6.0 * knee.log10() + (18.0 + wind_speed / 4.0) * (wind_speed / 10.0).log10())
}

/// Power sum of independent sources, `10·lg Σ 10^(SLᵢ/10)`.
pub fn total_spl(levels: &[f64]) -> Result<f64> {
    if levels.is_empty() {
        return Err(Error::Domain("total_spl needs at least one source".into()));
    }
    if let Some(bad) = levels.iter().find(|l| !l.is_finite()) {
        return Err(Error::Domain(format!("non-finite source level {bad}")));
    }
    // Factor out the loudest source so the exponentials cannot overflow.
    let peak = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = levels.iter().map(|l| 10f64.powf((l - peak) / 10.0)).sum();
    Ok(peak + 10.0 * sum.log10())
}
