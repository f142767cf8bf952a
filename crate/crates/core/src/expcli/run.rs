//! Experiment orchestration and metric files.
//!
//! Every algorithm writes the same CSV schema, one row per episode:
//!
//! ```text
//! seed,episode,mean_cost,moving_avg_cost,wall_ms
//! ```
//!
//! `mean_cost` is the episode's average AoI in seconds, `moving_avg_cost`
//! the trailing mean over the last `window` episodes (fewer at the start)
//! and `wall_ms` the elapsed milliseconds since the seed started, or 0 when
//! wall time is not recorded.
//!
//! Layout of an output directory:
//!
//! - `<algorithm>_seed<seed>.csv` for the main run and every baseline run,
//! - `<algorithm>_seed<seed>.policy.json` with the trained networks,
//! - `metrics.csv` with all seeds of the main run, in seed order,
//! - `summary.json`,
//! - `run.partial` while the run is incomplete. Rerunning the same config
//!   on the directory skips seeds whose CSV already exists.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig};
use crate::baselines::{madqn_train_with, run_heuristic_with, Heuristic};
use crate::mfhppo::{train_with, PolicyNets};
use crate::neural::checkpoint::{load_checkpoint, to_checkpoint, Checkpoint};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["seed", "episode", "mean_cost", "moving_avg_cost", "wall_ms"];
pub const PARTIAL_MARKER: &str = "run.partial";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub episode: usize,
    pub mean_cost: f64,
    pub moving_avg_cost: f64,
    pub wall_ms: u64,
}

/// Trailing mean over at most `window` values ending at each index.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Mean of the last `window` values (all of them when fewer).
pub fn final_window_mean(values: &[f64], window: usize) -> f64 {
    mean(&values[values.len().saturating_sub(window)..])
}

/// `(baseline − ours) / baseline`: the fraction by which `ours` undercuts the baseline.
pub fn relative_improvement(baseline: f64, ours: f64) -> f64 {
    (baseline - ours) / baseline
}

/// Cost that represents a whole run: the mean over all episodes for a
/// fixed policy, the final-window mean for a learner.
pub fn reference_cost(algorithm: Algorithm, costs: &[f64], window: usize) -> f64 {
    if algorithm.is_stationary() {
        mean(costs)
    } else {
        final_window_mean(costs, window)
    }
}

pub fn metrics_rows(seed: u64, costs: &[f64], wall_ms: &[u64], window: usize) -> Vec<MetricsRow> {
    moving_average(costs, window)
        .into_iter()
        .enumerate()
        .map(|(episode, moving_avg_cost)| MetricsRow {
            seed,
            episode,
            mean_cost: costs[episode],
            moving_avg_cost,
            wall_ms: wall_ms.get(episode).copied().unwrap_or(0),
        })
        .collect()
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    // header comes from the field names; an empty table still gets one
    let bytes = if rows.is_empty() {
        format!("{}\n", CSV_HEADER.join(",")).into_bytes()
    } else {
        bytes
    };
    write_atomic(path, &bytes)
}

/// Parses a metrics CSV, reporting the offending line on malformed input.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text, path)
}

pub fn parse_metrics(text: &str, origin: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(origin, e))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", CSV_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record.map_err(|e| csv_error(origin, e))?);
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: csv_kind_message(&kind),
        },
    }
}

fn csv_kind_message(kind: &csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        other => format!("{other:?}"),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Per-episode costs and wall times of one algorithm on one seed.
#[derive(Debug, Clone)]
pub struct AlgorithmRun {
    pub costs: Vec<f64>,
    pub wall_ms: Vec<u64>,
    /// Trained networks, for the learner.
    pub policies: Vec<PolicyNets>,
}

/// Episode-end timestamps in milliseconds since creation.
struct EpisodeClock {
    start: Instant,
    record: bool,
    episode_len: usize,
    steps: usize,
    wall_ms: Vec<u64>,
}

impl EpisodeClock {
    fn episode_done(&mut self) {
        if self.record {
            self.wall_ms.push(self.start.elapsed().as_millis() as u64);
        }
    }

    fn step_done(&mut self) {
        self.steps += 1;
        if self.steps % self.episode_len == 0 {
            self.episode_done();
        }
    }
}

pub fn run_algorithm(config: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> Result<AlgorithmRun> {
    let mut clock = EpisodeClock {
        start: Instant::now(),
        record: config.record_wall_time,
        episode_len: config.env.episode_len,
        steps: 0,
        wall_ms: Vec::with_capacity(config.episodes),
    };
    let (costs, policies) = match algorithm {
        Algorithm::Mfhppo => {
            let out = train_with(&config.env, &config.ppo, config.episodes, seed, |_| {
                clock.episode_done();
                Ok(())
            })?;
            (out.costs(), out.policies)
        }
        Algorithm::Rstd | Algorithm::Namas => {
            let policy = if algorithm == Algorithm::Rstd {
                Heuristic::Rstd
            } else {
                Heuristic::Namas {
                    radius: config.namas_radius,
                }
            };
            let costs = run_heuristic_with(&config.env, policy, config.episodes, seed, |_| clock.step_done())?;
            (costs, Vec::new())
        }
        Algorithm::Madqn => {
            let out = madqn_train_with(&config.env, &config.dqn, config.episodes, seed, |_, _| clock.step_done())?;
            (out.costs, Vec::new())
        }
    };
    Ok(AlgorithmRun {
        costs,
        wall_ms: clock.wall_ms,
        policies,
    })
}

pub fn save_policies(path: &Path, policies: &[PolicyNets]) -> Result<()> {
    let stored: Vec<Checkpoint> = policies.iter().map(to_checkpoint).collect();
    write_atomic(path, serde_json::to_string(&stored)?.as_bytes())
}

/// Networks shaped by `config`, with parameters read from `path`.
pub fn load_policies(path: &Path, config: &ExperimentConfig) -> Result<Vec<PolicyNets>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stored: Vec<Checkpoint> = serde_json::from_str(&text)?;
    let shape = config.ppo.shape(config.env.observation_dim(), config.env.num_sensors);
    let expected = if config.ppo.share_parameters { 1 } else { config.env.num_uavs };
    if stored.len() != expected {
        return Err(Error::Contract(format!(
            "{}: holds {} networks, config expects {expected}",
            path.display(),
            stored.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    stored
        .iter()
        .map(|ckpt| {
            let mut net = PolicyNets::new(shape, &mut rng);
            load_checkpoint(&mut net, ckpt)?;
            Ok(net)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub cost: f64,
    pub relative_improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_window_mean: f64,
    pub baselines: BTreeMap<String, BaselineSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub algorithm: Algorithm,
    pub window: usize,
    /// Seed average of the per-seed final-window means.
    pub final_window_mean: f64,
    /// Seed averages of the baseline costs and of the improvement over them.
    pub baselines: BTreeMap<String, BaselineSummary>,
    pub seeds: Vec<SeedSummary>,
    /// The effective configuration, defaults included.
    pub config: ExperimentConfig,
}

impl ExperimentSummary {
    pub fn seed(&self, seed: u64) -> Option<&SeedSummary> {
        self.seeds.iter().find(|s| s.seed == seed)
    }
}

pub fn run_file(dir: &Path, algorithm: Algorithm, seed: u64) -> PathBuf {
    dir.join(format!("{}_seed{seed}.csv", algorithm.name()))
}

pub fn policy_file(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("{}_seed{seed}.policy.json", Algorithm::Mfhppo.name()))
}

/// Runs the configured algorithm and its baselines on every seed, writes
/// the metric files into `out_dir` and returns the summary.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentSummary> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let marker = out_dir.join(PARTIAL_MARKER);
    let echoed = serde_json::to_string_pretty(config)?;
    let resuming = match fs::read_to_string(&marker) {
        Ok(previous) if previous == echoed => true,
        Ok(_) => {
            return Err(Error::Config(format!(
                "{} belongs to a partial run with a different config",
                marker.display()
            )))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => false,
        Err(e) => return Err(Error::io(&marker, e)),
    };
    fs::write(&marker, &echoed).map_err(|e| Error::io(&marker, e))?;

    let mut algorithms = vec![config.algorithm];
    algorithms.extend(config.baselines.iter().filter(|&&b| b != config.algorithm));

    let seed_costs: Vec<BTreeMap<Algorithm, Vec<f64>>> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut by_algorithm = BTreeMap::new();
            for &alg in &algorithms {
                let path = run_file(out_dir, alg, seed);
                let needs_policy = alg == Algorithm::Mfhppo;
                let complete = resuming && path.exists() && (!needs_policy || policy_file(out_dir, seed).exists());
                let costs = if complete {
                    read_metrics(&path)?.iter().map(|r| r.mean_cost).collect()
                } else {
                    let run = run_algorithm(config, alg, seed)?;
                    if needs_policy {
                        save_policies(&policy_file(out_dir, seed), &run.policies)?;
                    }
                    write_metrics(&path, &metrics_rows(seed, &run.costs, &run.wall_ms, config.window))?;
                    run.costs
                };
                by_algorithm.insert(alg, costs);
            }
            Ok(by_algorithm)
        })
        .collect::<Result<_>>()?;

    let mut merged = Vec::new();
    for &seed in &config.seeds {
        merged.extend(read_metrics(&run_file(out_dir, config.algorithm, seed))?);
    }
    write_metrics(&out_dir.join("metrics.csv"), &merged)?;

    let summary = summarize(config, &seed_costs);
    write_atomic(&out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    Ok(summary)
}

fn summarize(config: &ExperimentConfig, seed_costs: &[BTreeMap<Algorithm, Vec<f64>>]) -> ExperimentSummary {
    let w = config.window;
    let seeds: Vec<SeedSummary> = config
        .seeds
        .iter()
        .zip(seed_costs)
        .map(|(&seed, by_alg)| {
            let ours = reference_cost(config.algorithm, &by_alg[&config.algorithm], w);
            let baselines = by_alg
                .iter()
                .filter(|(&alg, _)| alg != config.algorithm)
                .map(|(&alg, costs)| {
                    let cost = reference_cost(alg, costs, w);
                    (
                        alg.name().to_string(),
                        BaselineSummary {
                            cost,
                            relative_improvement: relative_improvement(cost, ours),
                        },
                    )
                })
                .collect();
            SeedSummary {
                seed,
                final_window_mean: ours,
                baselines,
            }
        })
        .collect();
    let final_window_mean = mean(&seeds.iter().map(|s| s.final_window_mean).collect::<Vec<_>>());
    let mut baselines = BTreeMap::new();
    if let Some(first) = seeds.first() {
        for name in first.baselines.keys() {
            let cost = mean(&seeds.iter().map(|s| s.baselines[name].cost).collect::<Vec<_>>());
            let gain = mean(&seeds.iter().map(|s| s.baselines[name].relative_improvement).collect::<Vec<_>>());
            baselines.insert(
                name.clone(),
                BaselineSummary {
                    cost,
                    relative_improvement: gain,
                },
            );
        }
    }
    ExperimentSummary {
        algorithm: config.algorithm,
        window: w,
        final_window_mean,
        baselines,
        seeds,
        config: config.clone(),
    }
}

/// One cell of a clip-threshold × recurrence grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub clip: f64,
    pub lstm: bool,
    /// Seed average of the final-window mean cost.
    pub final_window_mean: f64,
    /// Seed average of the std of the last `tail` episode costs.
    pub tail_std: f64,
    pub tail: usize,
}

/// Trains the learner for every (clip, lstm) pair, each in its own
/// subdirectory, and writes `sweep.csv` next to them.
pub fn run_sweep(base: &ExperimentConfig, clips: &[f64], lstm: &[bool], tail: usize, out_dir: &Path) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &clip in clips {
        for &on in lstm {
            let mut cfg = base.clone();
            cfg.algorithm = Algorithm::Mfhppo;
            cfg.baselines.clear();
            cfg.ppo.clip = clip;
            cfg.ppo.lstm_enabled = on;
            let dir = out_dir.join(format!("clip{clip}_{}", if on { "lstm" } else { "dense" }));
            let summary = run_experiment(&cfg, &dir)?;
            let mut stds = Vec::new();
            for &seed in &cfg.seeds {
                let costs: Vec<f64> = read_metrics(&run_file(&dir, cfg.algorithm, seed))?.iter().map(|r| r.mean_cost).collect();
                stds.push(std_dev(&costs[costs.len().saturating_sub(tail)..]));
            }
            rows.push(SweepRow {
                clip,
                lstm: on,
                final_window_mean: summary.final_window_mean,
                tail_std: mean(&stds),
                tail,
            });
        }
    }
    let path = out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| csv_error(&path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
    write_atomic(&path, &bytes)?;
    Ok(rows)
}
