use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uasn_sim::harness::{
    compare_algorithms, histogram, metrics_csv, parse_edges, parse_summary_csv, run_experiment, run_stem, train_run,
    write_experiment, ExperimentConfig, RunResult, FULL_SCALE_ITERATIONS, RUN_HEADER,
};
use uasn_sim::marl::{Agents, Algorithm};
use uasn_sim::nn::Checkpoint;
use uasn_sim::ocean::World;
use uasn_sim::routing::{delivered_paths, path_delays, run_routing_task};
use uasn_sim::{Error, Result};

#[derive(Parser)]
#[command(name = "uasn", version, about = "Underwater acoustic network routing with masked multi-agent PPO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm per seed and write curves and checkpoints.
    Train(RunArgs),
    /// Route a packet batch with trained (or checkpointed) agents.
    Route {
        #[command(flatten)]
        run: RunArgs,
        /// Agent checkpoint to route with instead of training first.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Scenario JSON to route on instead of drawing one from the seed.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Train and route every algorithm under every seed, then summarize.
    Experiment(RunArgs),
    /// Check the delay ordering across summary CSVs.
    Compare {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
    /// Bucket the delays of a delivered-path export.
    ExportHist {
        #[arg(long)]
        paths: PathBuf,
        /// Comma-separated bucket edges in seconds, `inf` allowed.
        #[arg(long, default_value = "0,9,12,15,18,inf")]
        edges: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated algorithms: mappo, ma_mappo, ma_mappo_i.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    /// Output directory; overrides the config, `out` when neither sets it
    #[arg(long)]
    out: Option<PathBuf>,
    /// Train for the full 5000 iterations.
    #[arg(long)]
    full_scale: bool,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(algorithms) = &self.algorithms {
            cfg.algorithms = algorithms.clone();
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        if self.full_scale {
            cfg.train.iterations = FULL_SCALE_ITERATIONS;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn train_cmd(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let dir = output_dir(&cfg);
    for &algorithm in &cfg.algorithms {
        for &seed in &cfg.seeds {
            let (world, agents, curve) = train_run(&cfg, algorithm, seed)?;
            let stem = run_stem(algorithm, seed);
            write(&dir, &format!("train_{stem}.csv"), &metrics_csv(&curve))?;
            write(&dir, &format!("checkpoint_{stem}.json"), &agents.checkpoint().to_json()?)?;
            write(&dir, &format!("scenario_{stem}.json"), &world.scenario_json()?)?;
            write(&dir, &format!("meta_{stem}.toml"), &cfg.for_run(algorithm, seed).to_toml()?)?;
            println!("trained {stem}: {} iterations", curve.len());
        }
    }
    Ok(())
}

fn route_cmd(args: &RunArgs, checkpoint: Option<&Path>, scenario: Option<&Path>) -> Result<()> {
    let cfg = args.config()?;
    let dir = output_dir(&cfg);
    for &algorithm in &cfg.algorithms {
        for &seed in &cfg.seeds {
            let run_cfg = cfg.for_run(algorithm, seed);
            let (world, mut agents, curve) = match (checkpoint, scenario) {
                (None, None) => train_run(&cfg, algorithm, seed)?,
                _ => {
                    let world = match scenario {
                        Some(path) => World::from_scenario_json(&read(path)?)?,
                        None => World::init_scenario(run_cfg.world.clone())?,
                    };
                    let mut agents = Agents::new(&world, algorithm, &run_cfg.train, seed);
                    if let Some(path) = checkpoint {
                        agents.restore(&Checkpoint::from_json(&read(path)?)?)?;
                    }
                    (world, agents, Vec::new())
                }
            };
            let task = run_routing_task(&world, &mut agents, &cfg.task, &cfg.routing, &cfg.rewards, &cfg.train, seed)?;
            let run = RunResult { algorithm, seed, scenario: cfg.scenario(), curve, task, agents, world };
            let stem = run.stem();
            write(&dir, &format!("run_{stem}.csv"), &format!("{RUN_HEADER}\n{}\n", run.run_row()))?;
            write(&dir, &format!("paths_{stem}.csv"), &delivered_paths(&run.task.packets))?;
            write(&dir, &format!("hist_{stem}.csv"), &run.task.metrics.delay_histogram.to_csv())?;
            write(&dir, &format!("scenario_{stem}.json"), &run.world.scenario_json()?)?;
            let views = run.task.views.iter().map(|v| v.to_json()).collect::<Result<Vec<_>>>()?;
            write(&dir, &format!("views_{stem}.json"), &format!("[{}]\n", views.join(",\n")))?;
            write(&dir, &format!("meta_{stem}.toml"), &run_cfg.to_toml()?)?;
            let m = &run.task.metrics;
            println!(
                "routed {stem}: delivered {}/{}, mean delay {:.3} s, {} ticks",
                m.delivered, m.created, m.mean_delay_s, m.total_ticks
            );
        }
    }
    Ok(())
}

fn experiment_cmd(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let dir = output_dir(&cfg);
    let out = run_experiment(&cfg)?;
    write_experiment(&cfg, &out, &dir)?;
    let report = compare_algorithms(&out.summaries);
    println!("{} runs written to {}", out.runs.len(), dir.display());
    if let Ok(report) = report {
        print!("{report}");
    }
    Ok(())
}

fn compare_cmd(paths: &[PathBuf]) -> Result<()> {
    let mut summaries = Vec::new();
    for path in paths {
        summaries.extend(parse_summary_csv(&read(path)?)?);
    }
    print!("{}", compare_algorithms(&summaries)?);
    Ok(())
}

fn export_hist_cmd(paths: &Path, edges: &str, out: Option<&Path>) -> Result<()> {
    let delays = path_delays(&read(paths)?)?;
    let csv = histogram(&delays, &parse_edges(edges)?)?.to_csv();
    match out {
        Some(path) => fs::write(path, csv).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => train_cmd(args),
        Command::Route { run, checkpoint, scenario } => route_cmd(run, checkpoint.as_deref(), scenario.as_deref()),
        Command::Experiment(args) => experiment_cmd(args),
        Command::Compare { summaries } => compare_cmd(summaries),
        Command::ExportHist { paths, edges, out } => export_hist_cmd(paths, edges, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("uasn: {e}");
            ExitCode::FAILURE
        }
    }
}
