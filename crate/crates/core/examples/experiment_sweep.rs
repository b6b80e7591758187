//! Seed sweep over all algorithms, then the pairwise delay comparison.
//!
//! `cargo run --release --example experiment_sweep -- [iterations] [out_dir]`

use std::path::PathBuf;

use uasn_sim::harness::{compare_algorithms, run_experiment, summary_csv, write_experiment, ExperimentConfig};

fn main() -> uasn_sim::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::default();
    if let Some(iterations) = args.next().and_then(|a| a.parse().ok()) {
        cfg.train.iterations = iterations;
    }
    let out = run_experiment(&cfg)?;
    for run in &out.runs {
        let m = &run.task.metrics;
        let (first, last) = run.decile_rewards();
        println!(
            "{:>10} seed {}: delivered {}/{} dropped {} orphaned {} delay {:.2}s ticks {} interrupts {} reward {first:.4} -> {last:.4}",
            run.algorithm, run.seed, m.delivered, m.created, m.dropped, m.orphaned, m.mean_delay_s, m.total_ticks, m.interrupts
        );
    }
    print!("{}", summary_csv(&out.summaries));
    println!("{}", compare_algorithms(&out.summaries)?);
    if let Some(dir) = args.next() {
        write_experiment(&cfg, &out, &PathBuf::from(dir))?;
    }
    Ok(())
}
