//! Training-time scaling with the number of UAVs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::mfhppo::train;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub num_uavs: usize,
    /// Median wall time over the repeats, milliseconds.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub episodes: usize,
    pub episode_len: usize,
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of log time against log UAV count.
    pub exponent: f64,
}

/// Times `episodes` training episodes of the learner for each UAV count,
/// keeping everything else in `config` fixed. One untimed warmup run at
/// the first count precedes the measurements.
pub fn bench_scaling(config: &ExperimentConfig, uav_counts: &[usize], episodes: usize, repeats: usize) -> Result<BenchReport> {
    if uav_counts.len() < 2 {
        return Err(Error::Config("scaling bench needs at least two UAV counts".into()));
    }
    if episodes == 0 || repeats == 0 {
        return Err(Error::Config("bench episodes and repeats must be at least 1".into()));
    }
    let seed = config.seeds.first().copied().unwrap_or(0);
    let with_count = |n: usize| {
        let mut env = config.env.clone();
        env.num_uavs = n;
        env
    };
    train(&with_count(uav_counts[0]), &config.ppo, episodes, seed)?;
    let mut rows = Vec::with_capacity(uav_counts.len());
    for &n in uav_counts {
        let env = with_count(n);
        let mut times = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let start = Instant::now();
            train(&env, &config.ppo, episodes, seed)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            num_uavs: n,
            wall_ms: times[times.len() / 2],
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.num_uavs as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.wall_ms).collect();
    Ok(BenchReport {
        episodes,
        episode_len: config.env.episode_len,
        exponent: loglog_slope(&xs, &ys),
        rows,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expcli::config::Profile;

    #[test]
    fn slope_recovers_power_laws() {
        let xs = [2.0, 4.0, 8.0, 16.0];
        for p in [0.5, 1.0, 2.0] {
            let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(p)).collect();
            assert!((loglog_slope(&xs, &ys) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn needs_two_counts() {
        let c = ExperimentConfig::profile(Profile::Desk);
        assert!(matches!(bench_scaling(&c, &[4], 1, 1), Err(Error::Config(_))));
    }

    #[test]
    fn reports_every_count() {
        let mut c = ExperimentConfig::profile(Profile::Desk);
        c.env.episode_len = 4;
        c.ppo.hidden_width = 8;
        c.ppo.lstm_hidden = Some(4);
        let r = bench_scaling(&c, &[2, 3], 1, 1).unwrap();
        assert_eq!(r.rows.iter().map(|r| r.num_uavs).collect::<Vec<_>>(), vec![2, 3]);
        assert!(r.rows.iter().all(|r| r.wall_ms > 0.0));
        assert!(r.exponent.is_finite());
    }
}
