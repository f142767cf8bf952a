//! Comparison policies: random scheduling and trajectories, max-AoI
//! scheduling, and independent DQN agents flying fixed circles.

pub mod madqn;

pub use madqn::{circle_layout, epsilon_greedy, madqn_train, madqn_train_with, Circle, DqnConfig, MadqnOutcome, QLearner};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mmdp::{Env, EnvConfig, HybridAction};
use crate::world::{Vec2, WorldState};
use crate::Result;

/// Random scheduling and trajectory: every component uniform over its range.
pub fn rstd_policy<R: Rng + ?Sized>(world: &WorldState, env: &EnvConfig, rng: &mut R) -> HybridAction {
    let m = env.max_offset();
    HybridAction {
        sensor_index: rng.random_range(0..world.sensors.len()),
        waypoint_offset: Vec2::new(rng.random_range(-m..=m), rng.random_range(-m..=m)),
        speed: rng.random_range(env.v_min..=env.v_max),
    }
}

/// Schedules the sensor with the largest AoI (lowest index on ties) and flies
/// straight at it at full speed. With `radius`, only sensors within that
/// horizontal distance are candidates, falling back to all sensors when none is.
pub fn namas_policy(world: &WorldState, agent: usize, env: &EnvConfig, radius: Option<f64>) -> HybridAction {
    let me = world.uavs[agent].position;
    let in_scope = |p: Vec2| radius.is_none_or(|r| p.distance(me) <= r);
    let pick = |filter: &dyn Fn(Vec2) -> bool| {
        let mut best: Option<usize> = None;
        for (k, s) in world.sensors.iter().enumerate() {
            if filter(s.position) && best.is_none_or(|b| s.aoi > world.sensors[b].aoi) {
                best = Some(k);
            }
        }
        best
    };
    let target = pick(&in_scope).or_else(|| pick(&|_| true)).unwrap_or(0);
    let delta = world.sensors[target].position - me;
    let m = env.max_offset();
    let largest = delta.x.abs().max(delta.y.abs());
    let offset = if largest > m { delta * (m / largest) } else { delta };
    HybridAction {
        sensor_index: target,
        waypoint_offset: offset,
        speed: env.v_max,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Heuristic {
    Rstd,
    Namas { radius: Option<f64> },
}

/// Mean cost per episode of a heuristic policy on the scenario of `seed`.
pub fn run_heuristic(env_config: &EnvConfig, policy: Heuristic, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    run_heuristic_with(env_config, policy, episodes, seed, |_| {})
}

/// Like [`run_heuristic`], calling `on_step` with every post-step world.
pub fn run_heuristic_with<F: FnMut(&WorldState)>(
    env_config: &EnvConfig,
    policy: Heuristic,
    episodes: usize,
    seed: u64,
    mut on_step: F,
) -> Result<Vec<f64>> {
    let env = Env::new(env_config.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let n = env.config.num_uavs;
    let len = env.config.episode_len;
    let mut costs = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let (mut world, _) = env.reset_with(&mut rng);
        let mut sum = 0.0;
        for _ in 0..len {
            let actions: Vec<HybridAction> = (0..n)
                .map(|k| match policy {
                    Heuristic::Rstd => rstd_policy(&world, &env.config, &mut rng),
                    Heuristic::Namas { radius } => namas_policy(&world, k, &env.config, radius),
                })
                .collect();
            let step = env.step(&world, &actions)?;
            sum += step.cost;
            world = step.world;
            on_step(&world);
        }
        costs.push(sum / len as f64);
    }
    Ok(costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmdp::reset;

    fn cfg(num_uavs: usize, num_sensors: usize) -> EnvConfig {
        EnvConfig {
            num_uavs,
            num_sensors,
            area_width: 200.0,
            area_height: 200.0,
            ..EnvConfig::default()
        }
    }

    fn world_with_aois(aois: &[f64]) -> (EnvConfig, WorldState) {
        let c = cfg(1, aois.len());
        let (_, mut w, _) = reset(&c, 1).unwrap();
        for (s, &a) in w.sensors.iter_mut().zip(aois) {
            s.aoi = a;
        }
        (c, w)
    }

    #[test]
    fn namas_picks_max_aoi() {
        let (c, w) = world_with_aois(&[1.0, 5.0, 2.0]);
        assert_eq!(namas_policy(&w, 0, &c, None).sensor_index, 1);
    }

    #[test]
    fn namas_ties_go_to_lowest_index() {
        let (c, w) = world_with_aois(&[3.0, 3.0, 3.0]);
        assert_eq!(namas_policy(&w, 0, &c, None).sensor_index, 0);
    }

    #[test]
    fn namas_heads_at_target_at_full_speed() {
        let (c, mut w) = world_with_aois(&[1.0, 5.0]);
        w.uavs[0].position = Vec2::ZERO;
        w.sensors[1].position = Vec2::new(3.0, 4.0);
        let a = namas_policy(&w, 0, &c, None);
        let v = a.velocity_command(c.v_min, c.v_max);
        assert!((v - Vec2::new(9.0, 12.0)).norm() < 1e-12);
    }

    #[test]
    fn namas_radius_restricts_candidates() {
        let (c, mut w) = world_with_aois(&[1.0, 5.0, 2.0]);
        w.uavs[0].position = Vec2::ZERO;
        w.sensors[0].position = Vec2::new(10.0, 0.0);
        w.sensors[1].position = Vec2::new(150.0, 150.0);
        w.sensors[2].position = Vec2::new(0.0, 20.0);
        assert_eq!(namas_policy(&w, 0, &c, Some(50.0)).sensor_index, 2);
        assert_eq!(namas_policy(&w, 0, &c, Some(1.0)).sensor_index, 1);
    }

    #[test]
    fn namas_is_deterministic() {
        let (c, w) = world_with_aois(&[4.0, 2.0, 9.0, 1.0]);
        assert_eq!(namas_policy(&w, 0, &c, None), namas_policy(&w, 0, &c, None));
    }

    #[test]
    fn rstd_is_reproducible_and_bounded() {
        let c = cfg(1, 12);
        let (_, w, _) = reset(&c, 2).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let m = c.max_offset();
        for _ in 0..10_000 {
            let a = rstd_policy(&w, &c, &mut r1);
            assert_eq!(a, rstd_policy(&w, &c, &mut r2));
            assert!(a.sensor_index < 12);
            assert!(a.waypoint_offset.x.abs() <= m && a.waypoint_offset.y.abs() <= m);
            assert!((c.v_min..=c.v_max).contains(&a.speed));
        }
    }

    #[test]
    fn rstd_sensor_choice_is_uniform() {
        let j = 12usize;
        let c = cfg(1, j);
        let (_, w, _) = reset(&c, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 10_000usize;
        let mut counts = vec![0usize; j];
        for _ in 0..n {
            counts[rstd_policy(&w, &c, &mut rng).sensor_index] += 1;
        }
        let tol = 4.0 * (j as f64).sqrt() / ((n * j) as f64).sqrt();
        for k in counts {
            let f = k as f64 / n as f64;
            assert!((f - 1.0 / j as f64).abs() <= tol, "{f}");
        }
    }
}
