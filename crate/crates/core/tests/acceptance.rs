//! End-to-end acceptance: one PASS/FAIL line per criterion.
//!
//! Criteria 3 to 6 share one seed sweep at desk scale.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use rand::Rng;
use uasn_sim::acoustics::{storm_noise, thermal_noise, total_spl, vehicle_noise};
use uasn_sim::harness::{compare_algorithms, run_experiment, ExperimentConfig, ExperimentOutput, RunResult};
use uasn_sim::marl::{train, Agents, Algorithm, TrainContext};
use uasn_sim::mask::apply_mask;
use uasn_sim::nn::softmax;
use uasn_sim::ocean::{World, WorldConfig};
use uasn_sim::routing::{run_routing_task, PacketStatus, RoutingTask};

use common::gradcheck;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Verdict {
        Verdict { pass, detail: detail.into() }
    }
}

fn golden_values() -> Verdict {
    let thermal = thermal_noise(290.0, 1.0, 1.0).unwrap();
    let spl = total_spl(&[60.0, 60.0]).unwrap();
    let storm = storm_noise(400.0, 10.0).unwrap();
    let vehicle = vehicle_noise(1.0, 6.18, 1.0).unwrap();
    let pass = (thermal + 77.958).abs() <= 0.01
        && (spl - 63.010).abs() <= 0.001
        && (storm - 53.194).abs() <= 0.001
        && vehicle == 186.0;
    Verdict::new(pass, format!("thermal {thermal:.4}, spl {spl:.4}, storm {storm:.4}, vehicle {vehicle}"))
}

fn gradients() -> Verdict {
    let mut failures = Vec::new();
    let mut worst_block: f64 = 0.0;
    let mut worst_end_to_end: f64 = 0.0;
    for (name, check, tolerance) in gradcheck::CHECKS {
        let err = gradcheck::worst(check);
        if err >= tolerance {
            failures.push(format!("{name} {err:e}"));
        }
        if tolerance == gradcheck::BLOCK_TOL {
            worst_block = worst_block.max(err);
        } else {
            worst_end_to_end = worst_end_to_end.max(err);
        }
    }
    Verdict::new(
        failures.is_empty(),
        format!(
            "{} seeds, worst block {worst_block:.1e}, worst end-to-end {worst_end_to_end:.1e}{}",
            gradcheck::SEEDS,
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    )
}

/// Raising the threshold never adds an action, outside the fallback.
fn mask_monotone(draws: usize) -> usize {
    let mut r = common::rng(99);
    (0..draws)
        .filter(|_| {
            let n = r.gen_range(1..=12);
            let logits: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
            let scores = softmax(&logits);
            let (a, b) = (r.gen_range(0.0..1.0), r.gen_range(0.0..1.0));
            let (lo, hi) = (apply_mask(&scores, f64::min(a, b)), apply_mask(&scores, f64::max(a, b)));
            !hi.fallback && hi.binary.iter().zip(&lo.binary).any(|(&h, &l)| h && !l)
        })
        .count()
}

fn mask_invariants(out: &ExperimentOutput) -> Verdict {
    let iterations: usize = out.runs.iter().map(|r| r.curve.len()).sum();
    let violations: u64 = out.runs.iter().flat_map(|r| &r.curve).map(|m| m.mask_violations).sum::<u64>()
        + out.runs.iter().map(|r| r.task.audit.mask_violations).sum::<u64>();
    let sum_error = out
        .runs
        .iter()
        .flat_map(|r| r.curve.iter().map(|m| m.max_policy_sum_error).chain([r.task.audit.max_policy_sum_error]))
        .fold(0.0, f64::max);
    let non_monotone = mask_monotone(10_000);
    Verdict::new(
        violations == 0 && sum_error <= 1e-9 && non_monotone == 0,
        format!("{iterations} training iterations: {violations} masked samples, max |Σπ−1| {sum_error:.1e}; {non_monotone}/10000 monotonicity breaks"),
    )
}

fn run_of(out: &ExperimentOutput, algorithm: Algorithm, seed: u64) -> &RunResult {
    out.runs.iter().find(|r| r.algorithm == algorithm && r.seed == seed).expect("run present")
}

fn interrupt_correctness(out: &ExperimentOutput, seeds: &[u64]) -> Verdict {
    let conservation: u64 = out.runs.iter().map(|r| r.task.audit.conservation_violations).sum();
    let ticks: u64 = out.runs.iter().map(|r| r.task.audit.ticks).sum();
    let mut wins = 0;
    let mut ratios = Vec::new();
    for &seed in seeds {
        let (i, m) = (run_of(out, Algorithm::MaMappoI, seed), run_of(out, Algorithm::MaMappo, seed));
        let (ri, rm) = (i.task.metrics.delivery_ratio, m.task.metrics.delivery_ratio);
        wins += (ri > rm) as usize;
        ratios.push(format!("{ri:.3}/{rm:.3}"));
    }
    let drops: usize = out
        .runs
        .iter()
        .filter(|r| r.algorithm == Algorithm::MaMappoI)
        .map(|r| r.task.packets.iter().filter(|p| p.status == PacketStatus::Dropped).count())
        .sum();
    Verdict::new(
        conservation == 0 && wins == seeds.len() && drops == 0,
        format!(
            "{conservation} conservation breaks over {ticks} ticks; ma_mappo_i > ma_mappo delivery in {wins}/{} seeds ({}); {drops} ma_mappo_i drops",
            seeds.len(),
            ratios.join(" ")
        ),
    )
}

fn convergence_ordering(out: &ExperimentOutput, seeds: &[u64]) -> Verdict {
    let need = seeds.len().saturating_sub(1).max(1);
    let ordered = seeds
        .iter()
        .filter(|&&s| {
            let f = |a| run_of(out, a, s).decile_rewards().1;
            f(Algorithm::MaMappoI) >= f(Algorithm::MaMappo) && f(Algorithm::MaMappo) >= f(Algorithm::Mappo)
        })
        .count();
    let improving: Vec<(Algorithm, usize)> = Algorithm::ALL
        .iter()
        .map(|&a| {
            (a, seeds.iter().filter(|&&s| {
                let (first, last) = run_of(out, a, s).decile_rewards();
                last > first
            }).count())
        })
        .collect();
    let pass = ordered >= need && improving.iter().all(|&(_, n)| n >= need);
    let trend: Vec<String> = improving.iter().map(|(a, n)| format!("{a} {n}/{}", seeds.len())).collect();
    Verdict::new(pass, format!("ordering holds in {ordered}/{} seeds; final > first decile: {}", seeds.len(), trend.join(", ")))
}

fn delay_ordering(out: &ExperimentOutput) -> Verdict {
    match compare_algorithms(&out.summaries) {
        Ok(report) => {
            let delays: Vec<String> = out.summaries.iter().map(|s| format!("{} {:.3}s", s.algorithm, s.mean_delay_s)).collect();
            Verdict::new(report.delay_ordering_holds, format!("mean delay {}; compare flags {}", delays.join(", "), report.delay_ordering_holds))
        }
        Err(e) => Verdict::new(false, format!("compare failed: {e}")),
    }
}

/// `wall_ms` is the one timing column; everything else must match byte for byte.
fn without_wall_clock(csv: &str) -> String {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

fn reproducibility() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.train.iterations = 8;
    cfg.seeds = vec![1, 2];
    cfg.task.packet_count = 60;
    let config = dir.path().join("small.toml");
    fs::write(&config, cfg.to_toml().unwrap()).unwrap();
    let invoke = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_uasn"))
            .args(["experiment", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        out
    };
    let (a, b) = (invoke("first"), invoke("second"));
    let mut names: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    // Metadata records where it was written; that is the one expected difference.
    let read = |d: &Path, n: &str| fs::read_to_string(d.join(n)).unwrap_or_default().replace(&*d.to_string_lossy(), "<out>");
    let mut compared = 0;
    let mut differing = Vec::new();
    for name in names.iter().filter(|n| n.ends_with(".csv") || n.ends_with(".toml") || n.ends_with(".json")) {
        let (x, y) = (read(&a, name), read(&b, name));
        let same = if name.starts_with("train_") { without_wall_clock(&x) == without_wall_clock(&y) } else { x == y };
        compared += 1;
        if !same {
            differing.push(name.clone());
        }
    }
    let runs = names.iter().filter(|n| n.starts_with("run_")).count();
    Verdict::new(
        differing.is_empty() && runs == 6,
        format!("{compared} files from two invocations ({runs} run CSVs) identical except {:?} (train wall_ms and output dir ignored)", differing),
    )
}

fn scaling_smoke() -> Verdict {
    let mut cfg = ExperimentConfig { world: WorldConfig { node_count: 125, seed: 3, ..WorldConfig::default() }, ..ExperimentConfig::default() };
    cfg.train.iterations = 50;
    let world = match World::init_scenario(cfg.world.clone()) {
        Ok(w) => w,
        Err(e) => return Verdict::new(false, format!("init failed: {e}")),
    };
    let algorithm = Algorithm::MaMappoI;
    let mut agents = Agents::new(&world, algorithm, &cfg.train, 3);
    let ctx = TrainContext::new(cfg.train.clone(), cfg.routing, cfg.rewards, 3);
    let curve = train(&world, &mut agents, &ctx, |_| {}).unwrap();
    let task = RoutingTask { packet_count: 100, ..cfg.task.clone() };
    let outcome = run_routing_task(&world, &mut agents, &task, &cfg.routing, &cfg.rewards, &cfg.train, 3).unwrap();
    let audit = &outcome.audit;
    let training_violations: u64 = curve.iter().map(|m| m.mask_violations).sum();
    let loops = outcome.packets.iter().filter(|p| p.status == PacketStatus::Delivered && p.hops() > cfg.routing.h_max).count();
    let open = outcome.packets.iter().filter(|p| !p.status.is_terminal()).count();
    let dropped = outcome.metrics.dropped;
    let violations = audit.conservation_violations + audit.mask_violations + audit.view_violations + training_violations;
    Verdict::new(
        curve.len() == 50 && outcome.metrics.created == 100 && violations == 0 && loops == 0 && open == 0 && dropped == 0,
        format!(
            "{} nodes, {} iterations, {} packets ({} delivered): {violations} invariant violations",
            world.len(),
            curve.len(),
            outcome.metrics.created,
            outcome.metrics.delivered
        ),
    )
}

#[test]
fn acceptance() {
    let cfg = ExperimentConfig::default();
    let seeds = cfg.seeds.clone();
    let sweep = run_experiment(&cfg).expect("desk-scale sweep");

    let verdicts = [
        ("closed-form golden values", golden_values()),
        ("gradient suite", gradients()),
        ("mask invariants", mask_invariants(&sweep)),
        ("interrupt correctness", interrupt_correctness(&sweep, &seeds)),
        ("convergence ordering", convergence_ordering(&sweep, &seeds)),
        ("delay ordering", delay_ordering(&sweep)),
        ("reproducibility", reproducibility()),
        ("scaling smoke test", scaling_smoke()),
    ];
    for (k, (name, v)) in verdicts.iter().enumerate() {
        println!("{} {}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, k + 1, v.detail);
    }
    let failed: Vec<usize> = verdicts.iter().enumerate().filter(|(_, (_, v))| !v.pass).map(|(k, _)| k + 1).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
