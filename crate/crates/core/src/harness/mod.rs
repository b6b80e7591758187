//! Experiment orchestration: configs, seed sweeps, summaries and exports.

mod compare;
mod histogram;
mod stats;

pub use compare::{compare_algorithms, CompareReport, Ordering3, PairwiseOrdering};
pub use histogram::{default_edges, histogram, parse_edges, Histogram, REFERENCE_EDGES_S};
pub use stats::{mean, student_t_half_width, summarize, Summary};

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marl::{train, Agents, Algorithm, IterationMetrics, RewardWeights, TrainConfig, TrainContext};
use crate::routing::{delivered_paths, run_routing_task, RoutingConfig, RoutingTask, TaskOutcome};
use crate::ocean::{World, WorldConfig};

/// Column header of every training metrics CSV.
pub const METRICS_HEADER: &str = "iteration,mean_reward,actor_loss,critic_loss,masked_fraction,wall_ms";
/// Column header of per-run result CSVs.
pub const RUN_HEADER: &str = "algorithm,seed,scenario,created,delivered,dropped,orphaned,delivery_ratio,mean_delay_s,mean_hops,total_ticks,interrupts,first_decile_reward,final_decile_reward";
pub const SUMMARY_HEADER: &str = "algorithm,scenario,runs,mean_delay_s,mean_delay_ci95,delivery_ratio,delivery_ratio_ci95,total_ticks,total_ticks_ci95,final_decile_reward,final_decile_reward_ci95";
/// Training iterations used by `--full-scale`.
pub const FULL_SCALE_ITERATIONS: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub world: WorldConfig,
    pub train: TrainConfig,
    pub rewards: RewardWeights,
    pub routing: RoutingConfig,
    pub task: RoutingTask,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: None,
            world: WorldConfig::default(),
            train: TrainConfig::default(),
            rewards: RewardWeights::default(),
            routing: RoutingConfig::default(),
            task: RoutingTask::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(Error::Config("algorithms are listed twice".into()));
        }
        self.world.validate()?;
        self.train.validate()?;
        self.rewards.validate()?;
        self.routing.validate()?;
        self.task.validate()
    }

    /// Scenario label shared by runs that are comparable.
    pub fn scenario(&self) -> String {
        format!(
            "n{}_ca{}_nd{}_fail{}",
            self.world.node_count, self.world.ca_count, self.task.packet_count, self.task.failure_rate
        )
    }

    /// Configuration of the run `(algorithm, seed)` alone; the world is drawn from the run seed.
    pub fn for_run(&self, algorithm: Algorithm, seed: u64) -> ExperimentConfig {
        let mut cfg = self.clone();
        cfg.algorithms = vec![algorithm];
        cfg.seeds = vec![seed];
        cfg.world.seed = seed;
        cfg
    }
}

/// Result of training and evaluating one `(algorithm, seed)` pair.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub scenario: String,
    pub curve: Vec<IterationMetrics>,
    pub task: TaskOutcome,
    pub agents: Agents,
    pub world: World,
}

impl RunResult {
    /// Mean reward over the first and the last tenth of training.
    pub fn decile_rewards(&self) -> (f64, f64) {
        decile_means(&self.curve.iter().map(|m| m.mean_reward).collect::<Vec<_>>())
    }

    pub fn run_row(&self) -> String {
        let m = &self.task.metrics;
        let (first, last) = self.decile_rewards();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.seed,
            self.scenario,
            m.created,
            m.delivered,
            m.dropped,
            m.orphaned,
            m.delivery_ratio,
            m.mean_delay_s,
            m.mean_hops,
            m.total_ticks,
            m.interrupts,
            first,
            last
        )
    }

    pub fn stem(&self) -> String {
        run_stem(self.algorithm, self.seed)
    }
}

pub fn run_stem(algorithm: Algorithm, seed: u64) -> String {
    format!("{algorithm}_seed{seed}")
}

/// Means of the first and last `ceil(n/10)` entries.
pub fn decile_means(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = values.len().div_ceil(10);
    (mean(&values[..k]), mean(&values[values.len() - k..]))
}

pub fn metrics_csv(curve: &[IterationMetrics]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for m in curve {
        out.push_str(&format!(
            "{},{},{},{},{},{:.3}\n",
            m.iteration, m.mean_reward, m.actor_loss, m.critic_loss, m.masked_fraction, m.wall_ms
        ));
    }
    out
}

/// Train `algorithm` from scratch on the world drawn from `seed`.
pub fn train_run(cfg: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> Result<(World, Agents, Vec<IterationMetrics>)> {
    let cfg = cfg.for_run(algorithm, seed);
    let world = World::init_scenario(cfg.world.clone())?;
    let mut agents = Agents::new(&world, algorithm, &cfg.train, seed);
    let ctx = TrainContext::new(cfg.train.clone(), cfg.routing, cfg.rewards, seed);
    let curve = train(&world, &mut agents, &ctx, |_| {})?;
    Ok((world, agents, curve))
}

/// Train then route one `(algorithm, seed)` pair.
pub fn execute_run(cfg: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> Result<RunResult> {
    let (world, mut agents, curve) = train_run(cfg, algorithm, seed)?;
    let task = run_routing_task(&world, &mut agents, &cfg.task, &cfg.routing, &cfg.rewards, &cfg.train, seed)?;
    Ok(RunResult { algorithm, seed, scenario: cfg.scenario(), curve, task, agents, world })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<RunResult>,
    pub summaries: Vec<Summary>,
}

/// Every `(algorithm, seed)` run in parallel, reduced in config order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let jobs: Vec<(Algorithm, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(a, s)| execute_run(cfg, a, s))
        .collect::<Result<Vec<_>>>()?;
    let summaries = cfg
        .algorithms
        .iter()
        .map(|&a| {
            let mine: Vec<&RunResult> = runs.iter().filter(|r| r.algorithm == a).collect();
            summarize(a, &cfg.scenario(), &mine)
        })
        .collect();
    Ok(ExperimentOutput { runs, summaries })
}

/// Write run CSVs, training curves, paths, histograms, checkpoints, metadata and the summary.
pub fn write_experiment(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let write = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    };
    let mut all_runs = format!("{RUN_HEADER}\n");
    for run in &out.runs {
        let stem = run.stem();
        let row = run.run_row();
        write(&format!("run_{stem}.csv"), &format!("{RUN_HEADER}\n{row}\n"))?;
        all_runs.push_str(&row);
        all_runs.push('\n');
        write(&format!("train_{stem}.csv"), &metrics_csv(&run.curve))?;
        write(&format!("paths_{stem}.csv"), &delivered_paths(&run.task.packets))?;
        write(&format!("hist_{stem}.csv"), &run.task.metrics.delay_histogram.to_csv())?;
        write(&format!("checkpoint_{stem}.json"), &run.agents.checkpoint().to_json()?)?;
        write(&format!("meta_{stem}.toml"), &cfg.for_run(run.algorithm, run.seed).to_toml()?)?;
    }
    write("runs.csv", &all_runs)?;
    write("summary.csv", &summary_csv(&out.summaries))?;
    write("metadata.toml", &cfg.to_toml()?)
}

pub fn summary_csv(summaries: &[Summary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in summaries {
        out.push_str(&s.to_row());
        out.push('\n');
    }
    out
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<Summary>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == SUMMARY_HEADER => {}
        _ => return Err(Error::Parse("summary CSV header mismatch".into())),
    }
    lines.map(Summary::from_row).collect()
}
