//! Training time grows linearly with episode length. Kept in its own test
//! binary so no other test competes for the CPU while it measures.

use std::time::Instant;

use aoi_swarm::expcli::{ExperimentConfig, Profile};
use aoi_swarm::mfhppo::train;

fn median_ms(cfg: &ExperimentConfig, episodes: usize) -> f64 {
    let mut times: Vec<f64> = (0..3)
        .map(|_| {
            let start = Instant::now();
            train(&cfg.env, &cfg.ppo, episodes, 0).unwrap();
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[1]
}

#[test]
fn doubling_episode_length_doubles_time() {
    let mut cfg = ExperimentConfig::profile(Profile::Desk);
    cfg.env.episode_len = 20;
    train(&cfg.env, &cfg.ppo, 2, 0).unwrap();
    let short = median_ms(&cfg, 4);
    cfg.env.episode_len = 40;
    let long = median_ms(&cfg, 4);
    let ratio = long / short;
    assert!((1.0..=3.0).contains(&ratio), "time ratio {ratio:.2} for doubled episode length");
}
