//! Independent DQN agents. Each UAV flies a fixed circle and learns which
//! sensor to schedule and how fast to fly along the circle.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mmdp::{Env, EnvConfig, HybridAction};
use crate::neural::{Activation, AdamState, Mlp, Parameterized};
use crate::world::{average_aoi, Bounds, Vec2, WorldState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqnConfig {
    /// Speeds along the circle, m/s.
    pub speed_levels: Vec<f64>,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which epsilon decays linearly.
    pub epsilon_decay_episodes: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Gradient steps between target-network copies.
    pub target_sync_steps: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Environment steps between gradient steps.
    pub train_every: usize,
    /// Transitions stored before learning starts.
    pub warmup: usize,
    pub reward_scale: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            speed_levels: vec![5.0, 10.0, 15.0],
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_episodes: 1000,
            replay_capacity: 20_000,
            batch_size: 32,
            target_sync_steps: 200,
            learning_rate: 3e-4,
            gamma: 0.99,
            hidden_width: 256,
            hidden_layers: 2,
            train_every: 1,
            warmup: 500,
            reward_scale: 1.0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self, env: &EnvConfig) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.speed_levels.is_empty() {
            return fail("speed_levels must not be empty".into());
        }
        if let Some(v) = self.speed_levels.iter().find(|&&v| !(v >= env.v_min && v <= env.v_max)) {
            return fail(format!("speed level {v} outside [{}, {}]", env.v_min, env.v_max));
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return fail(format!("epsilon {e} outside [0, 1]"));
            }
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return fail("replay_capacity must hold at least one batch".into());
        }
        if self.target_sync_steps == 0 || self.train_every == 0 || self.hidden_width == 0 {
            return fail("target_sync_steps, train_every and hidden_width must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) || !(0.0..=1.0).contains(&self.gamma) {
            return fail("learning_rate must be positive and gamma in [0, 1]".into());
        }
        Ok(())
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.epsilon_decay_episodes == 0 {
            return self.epsilon_end;
        }
        let f = (episode as f64 / self.epsilon_decay_episodes as f64).min(1.0);
        self.epsilon_start + f * (self.epsilon_end - self.epsilon_start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn point(&self, phase: f64) -> Vec2 {
        self.center + Vec2::new(phase.cos(), phase.sin()) * self.radius
    }
}

/// Circle centers on a `⌈√I⌉`-column grid; radius a quarter of the smaller cell side.
pub fn circle_layout(num_uavs: usize, bounds: &Bounds) -> Vec<Circle> {
    let cols = (num_uavs as f64).sqrt().ceil().max(1.0) as usize;
    let rows = num_uavs.div_ceil(cols).max(1);
    let (cw, ch) = (bounds.width() / cols as f64, bounds.height() / rows as f64);
    let radius = cw.min(ch) / 4.0;
    (0..num_uavs)
        .map(|k| Circle {
            center: bounds.min + Vec2::new((k % cols) as f64 * cw + cw / 2.0, (k / cols) as f64 * ch + ch / 2.0),
            radius,
        })
        .collect()
}

/// Uniform action with probability `epsilon`, otherwise the first argmax.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q.len())
    } else {
        crate::mfhppo::policy::argmax(q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Q-network with its target copy and optimizer.
#[derive(Debug, Clone)]
pub struct QLearner {
    pub q: Mlp,
    pub target: Mlp,
    adam: AdamState,
    pub gamma: f64,
    pub updates: usize,
}

impl QLearner {
    pub fn new<R: Rng + ?Sized>(input: usize, actions: usize, width: usize, layers: usize, lr: f64, gamma: f64, rng: &mut R) -> Self {
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(width, layers));
        sizes.push(actions);
        let q = Mlp::new("q", &sizes, Activation::Relu, Activation::Identity, rng);
        QLearner {
            adam: AdamState::new(&q, lr),
            target: q.clone(),
            q,
            gamma,
            updates: 0,
        }
    }

    /// One gradient step on the squared TD error of `batch`; returns the mean
    /// squared TD error before the step.
    pub fn td_step(&mut self, batch: &[&Experience]) -> Result<f64> {
        let mut grad = self.q.zeroed();
        let w = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for e in batch {
            let next = if e.done {
                0.0
            } else {
                self.target.forward(&e.next_state)?.into_iter().fold(f64::NEG_INFINITY, f64::max)
            };
            let y = e.reward + self.gamma * next;
            let (q, caches) = self.q.forward_cached(&e.state)?;
            let err = q[e.action] - y;
            loss += w * err * err;
            let mut d = vec![0.0; q.len()];
            d[e.action] = 2.0 * w * err;
            self.q.backward(&caches, &d, &mut grad);
        }
        self.adam.update(&mut self.q, &grad)?;
        self.updates += 1;
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target = self.q.clone();
    }
}

#[derive(Debug, Clone)]
pub struct MadqnOutcome {
    pub costs: Vec<f64>,
    pub learners: Vec<QLearner>,
}

pub fn madqn_train(env_config: &EnvConfig, dqn: &DqnConfig, episodes: usize, seed: u64) -> Result<MadqnOutcome> {
    madqn_train_with(env_config, dqn, episodes, seed, |_, _| {})
}

/// Trains one learner per UAV; `on_step(world, circles)` sees every post-step world.
pub fn madqn_train_with<F: FnMut(&WorldState, &[Circle])>(
    env_config: &EnvConfig,
    dqn: &DqnConfig,
    episodes: usize,
    seed: u64,
    mut on_step: F,
) -> Result<MadqnOutcome> {
    dqn.validate(env_config)?;
    let env = Env::new(env_config.clone(), seed)?;
    let c = &env.config;
    let n = c.num_uavs;
    let levels = dqn.speed_levels.len();
    let actions = c.num_sensors * levels;
    let circles = circle_layout(n, &c.bounds());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut learners: Vec<QLearner> = (0..n)
        .map(|_| {
            QLearner::new(c.observation_dim(), actions, dqn.hidden_width, dqn.hidden_layers, dqn.learning_rate, dqn.gamma, &mut rng)
        })
        .collect();
    rng.set_stream(2);
    let mut replay: Vec<VecDeque<Experience>> = (0..n).map(|_| VecDeque::with_capacity(dqn.replay_capacity)).collect();
    let mut steps = 0usize;
    let mut costs = Vec::with_capacity(episodes);

    for episode in 0..episodes {
        let eps = dqn.epsilon(episode);
        let (mut world, _) = env.reset_with(&mut rng);
        let mut phases: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        for (k, uav) in world.uavs.iter_mut().enumerate() {
            uav.position = circles[k].point(phases[k]);
        }
        let mut obs = env.observe(&world, &vec![None; n]);
        let mut sum = 0.0;
        for t in 0..c.episode_len {
            let mut chosen = Vec::with_capacity(n);
            let mut executed = Vec::with_capacity(n);
            for k in 0..n {
                let q = learners[k].q.forward(&obs[k].features)?;
                let a = epsilon_greedy(&q, eps, &mut rng);
                let (sensor, speed) = (a / levels, dqn.speed_levels[a % levels]);
                let circle = circles[k];
                phases[k] = (phases[k] + speed * c.dt / circle.radius).rem_euclid(TAU);
                let tangent = Vec2::new(-phases[k].sin(), phases[k].cos());
                world.uavs[k].position = circle.point(phases[k]);
                world.uavs[k].velocity = tangent * speed;
                chosen.push(a);
                executed.push(Some(HybridAction {
                    sensor_index: sensor,
                    waypoint_offset: tangent,
                    speed,
                }));
            }
            let schedules: Vec<usize> = chosen.iter().map(|a| a / levels).collect();
            env.collect_and_age(&mut world, &schedules)?;
            let cost = average_aoi(&world)?;
            sum += cost;
            on_step(&world, &circles);
            let next_obs = env.observe(&world, &executed);
            let done = t + 1 == c.episode_len;
            for k in 0..n {
                if replay[k].len() == dqn.replay_capacity {
                    replay[k].pop_front();
                }
                replay[k].push_back(Experience {
                    state: obs[k].features.clone(),
                    action: chosen[k],
                    reward: -cost * dqn.reward_scale,
                    next_state: next_obs[k].features.clone(),
                    done,
                });
            }
            obs = next_obs;
            steps += 1;
            if steps % dqn.train_every == 0 {
                for k in 0..n {
                    if replay[k].len() < dqn.warmup.max(dqn.batch_size) {
                        continue;
                    }
                    let batch: Vec<&Experience> = (0..dqn.batch_size)
                        .map(|_| &replay[k][rng.random_range(0..replay[k].len())])
                        .collect();
                    let loss = learners[k].td_step(&batch)?;
                    if !loss.is_finite() {
                        return Err(Error::Diverged {
                            episode,
                            detail: format!("agent {k} TD loss {loss}"),
                        });
                    }
                    if learners[k].updates % dqn.target_sync_steps == 0 {
                        learners[k].sync_target();
                    }
                }
            }
        }
        costs.push(sum / c.episode_len as f64);
    }
    Ok(MadqnOutcome { costs, learners })
}
