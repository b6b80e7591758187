//! Ambient noise source levels and their power sum across frequency and sea state.
//!
//! `cargo run --example noise_levels`

use uasn_sim::acoustics::{total_spl, NoiseSourceParams};

fn main() -> uasn_sim::Result<()> {
    println!("{:>9} {:>5} {:>9} {:>9} {:>11} {:>8} {:>8}", "freq_hz", "wind", "vehicle", "thermal", "turbulence", "storm", "total");
    for frequency_hz in [400.0, 2_000.0, 20_000.0] {
        for wind_speed in [0.0, 10.0, 20.0] {
            let params = NoiseSourceParams { frequency_hz, wind_speed, ..NoiseSourceParams::default() };
            let levels = params.source_levels()?;
            let storm = levels.get(3).map_or("-".to_string(), |s| format!("{s:.2}"));
            println!(
                "{frequency_hz:>9} {wind_speed:>5} {:>9.2} {:>9.2} {:>11.2} {storm:>8} {:>8.2}",
                levels[0],
                levels[1],
                levels[2],
                total_spl(&levels)?
            );
        }
    }
    Ok(())
}
