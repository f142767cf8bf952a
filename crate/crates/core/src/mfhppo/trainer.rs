use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::buffer::{RolloutBuffer, Transition};
use super::loss::{gae, normalize_advantages};
use super::policy::{LossParts, PolicyNets, SequenceBatch};
use super::PpoConfig;
use crate::mmdp::{Env, EnvConfig, HybridAction};
use crate::neural::{AdamState, LstmState, Parameterized};
use crate::{Error, Result};

/// Per-episode training metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Average over the episode's steps of the average AoI.
    pub mean_cost: f64,
    /// Loss terms of the last minibatch of the episode.
    pub loss: LossParts,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub episodes: Vec<EpisodeStats>,
    pub policies: Vec<PolicyNets>,
    pub syncs: usize,
}

impl TrainOutcome {
    pub fn costs(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.mean_cost).collect()
    }
}

/// Rollout and optimization state for one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub env: Env,
    pub config: PpoConfig,
    /// Parameters being optimized: one entry when shared, else one per UAV.
    pub policies: Vec<PolicyNets>,
    /// Snapshot used for sampling, refreshed once per optimization phase.
    pub sampling: Vec<PolicyNets>,
    optimizers: Vec<AdamState>,
    pub buffer: RolloutBuffer,
    rng: ChaCha8Rng,
    pub syncs: usize,
    pub episode: usize,
    /// Steps per agent consumed by the most recent optimization phase.
    pub last_phase_len: usize,
    last_loss: LossParts,
}

impl Trainer {
    pub fn new(env_config: EnvConfig, config: PpoConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let env = Env::new(env_config, seed)?;
        let c = &env.config;
        let shape = config.shape(c.observation_dim(), c.num_sensors);
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        init_rng.set_stream(1);
        let nets = if config.share_parameters { 1 } else { c.num_uavs };
        let policies: Vec<PolicyNets> = (0..nets).map(|_| PolicyNets::new(shape, &mut init_rng)).collect();
        let optimizers = policies.iter().map(|p| AdamState::new(p, config.learning_rate)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        Ok(Trainer {
            buffer: RolloutBuffer::new(c.num_uavs, config.buffer_capacity),
            sampling: policies.clone(),
            policies,
            optimizers,
            rng,
            syncs: 0,
            episode: 0,
            last_phase_len: 0,
            last_loss: LossParts::default(),
            env,
            config,
        })
    }

    pub fn net_of(&self, agent: usize) -> usize {
        if self.config.share_parameters {
            0
        } else {
            agent
        }
    }

    /// Runs one episode with the sampling policy, optimizing whenever the
    /// buffer fills, and once more at the end of the episode.
    pub fn run_episode(&mut self) -> Result<EpisodeStats> {
        let mean_cost = self.rollout()?;
        if !self.buffer.is_empty() {
            self.optimize()?;
        }
        let stats = EpisodeStats {
            episode: self.episode,
            mean_cost,
            loss: self.last_loss,
        };
        self.episode += 1;
        Ok(stats)
    }

    /// Samples one episode into the buffer and returns its mean cost. Leaves
    /// the tail of the episode in the buffer.
    pub fn rollout(&mut self) -> Result<f64> {
        let num_uavs = self.env.config.num_uavs;
        let len = self.env.config.episode_len;
        let (mut world, mut obs) = self.env.reset_with(&mut self.rng);
        let mut states: Vec<Option<LstmState>> =
            (0..num_uavs).map(|k| self.sampling[self.net_of(k)].initial_state()).collect();
        let mut cost_sum = 0.0;
        for t in 0..len {
            if self.buffer.is_empty() {
                for (traj, s) in self.buffer.agents.iter_mut().zip(&states) {
                    traj.start_state = s.clone();
                }
            }
            let mut sampled = Vec::with_capacity(num_uavs);
            for k in 0..num_uavs {
                let net = &self.sampling[self.net_of(k)];
                sampled.push(net.sample_action(&mut states[k], &obs[k].features, &self.env.config, &mut self.rng)?);
            }
            let actions: Vec<HybridAction> = sampled.iter().map(|s| s.action).collect();
            let step = self.env.step(&world, &actions)?;
            let done = t + 1 == len;
            for (k, s) in sampled.into_iter().enumerate() {
                self.buffer.push(
                    k,
                    Transition {
                        features: obs[k].features.clone(),
                        mean_field: obs[k].mean_field.clone(),
                        action: s.action,
                        raw_continuous: s.raw_continuous,
                        cost: step.cost,
                        log_prob: s.log_prob,
                        log_prob_continuous: s.log_prob_continuous,
                        log_prob_discrete: s.log_prob_discrete,
                        value: s.value,
                        done,
                    },
                );
            }
            cost_sum += step.cost;
            world = step.world;
            obs = step.observations;
            if done || self.buffer.is_full() {
                for k in 0..num_uavs {
                    self.buffer.agents[k].bootstrap_value = if done && !self.config.bootstrap_at_time_limit {
                        0.0
                    } else {
                        self.sampling[self.net_of(k)].peek_value(&states[k], &obs[k].features)?
                    };
                }
            }
            if self.buffer.is_full() && !done {
                self.optimize()?;
            }
        }
        Ok(cost_sum / len as f64)
    }

    /// Advantages and returns per agent, advantages normalized over the whole buffer.
    pub fn advantages(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let scale = self.config.reward_scale;
        let mut advs = Vec::with_capacity(self.buffer.agents.len());
        let mut rets = Vec::with_capacity(self.buffer.agents.len());
        for traj in &self.buffer.agents {
            let costs: Vec<f64> = traj.steps.iter().map(|s| s.cost * scale).collect();
            let mut values: Vec<f64> = traj.steps.iter().map(|s| s.value).collect();
            values.push(traj.bootstrap_value);
            let truncate = self.config.bootstrap_at_time_limit;
            let dones: Vec<bool> = traj.steps.iter().map(|s| s.done && !truncate).collect();
            let (a, r) = gae(&costs, &values, &dones, self.config.gamma, self.config.gae_lambda);
            advs.push(a);
            rets.push(r);
        }
        let mut flat: Vec<f64> = advs.concat();
        normalize_advantages(&mut flat);
        let mut offset = 0;
        for a in &mut advs {
            let n = a.len();
            a.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        (advs, rets)
    }

    /// Optimization phase over the buffer, then policy sync and buffer drop.
    pub fn optimize(&mut self) -> Result<LossParts> {
        let (advs, rets) = self.advantages();
        let steps = self.buffer.len();
        let coef = self.config.coefficients();
        let groups: Vec<Vec<usize>> = if self.config.share_parameters {
            vec![(0..self.buffer.agents.len()).collect()]
        } else {
            (0..self.buffer.agents.len()).map(|k| vec![k]).collect()
        };
        let mut last = LossParts::default();
        for (g, agents) in groups.iter().enumerate() {
            let mut samples: Vec<(usize, usize)> =
                agents.iter().flat_map(|&k| (0..steps).map(move |t| (k, t))).collect();
            let chunk = samples.len().div_ceil(self.config.minibatches).max(1);
            for _ in 0..self.config.epochs {
                samples.shuffle(&mut self.rng);
                for mb in samples.chunks(chunk) {
                    let mut masks: Vec<Vec<bool>> = vec![vec![false; steps]; self.buffer.agents.len()];
                    for &(k, t) in mb {
                        masks[k][t] = true;
                    }
                    let batches: Vec<SequenceBatch<'_>> = agents
                        .iter()
                        .filter(|&&k| masks[k].iter().any(|&m| m))
                        .map(|&k| SequenceBatch {
                            trajectory: &self.buffer.agents[k],
                            advantages: &advs[k],
                            returns: &rets[k],
                            selected: &masks[k],
                        })
                        .collect();
                    let (parts, mut grad) = self.policies[g]
                        .loss_gradient(&batches, coef)
                        .map_err(|e| self.diverged(format!("{e}")))?;
                    let norm = grad.l2_norm();
                    if !norm.is_finite() {
                        return Err(self.diverged(format!("non-finite gradient norm, loss terms {parts:?}")));
                    }
                    if let Some(max) = self.config.max_grad_norm {
                        if norm > max {
                            grad.scale(max / norm);
                        }
                    }
                    self.optimizers[g].update(&mut self.policies[g], &grad)?;
                    self.policies[g].clamp_log_std(self.config.log_std_min, self.config.log_std_max);
                    last = parts;
                }
            }
            if !self.policies[g].flat().iter().all(|v| v.is_finite()) {
                return Err(self.diverged("non-finite parameters after update".into()));
            }
        }
        self.sampling = self.policies.clone();
        self.syncs += 1;
        self.last_phase_len = steps;
        self.last_loss = last;
        self.buffer.clear();
        Ok(last)
    }

    fn diverged(&self, detail: String) -> Error {
        Error::Diverged {
            episode: self.episode,
            detail,
        }
    }
}

/// Trains for `episodes` episodes and returns per-episode metrics.
pub fn train(env_config: &EnvConfig, config: &PpoConfig, episodes: usize, seed: u64) -> Result<TrainOutcome> {
    train_with(env_config, config, episodes, seed, |_| Ok(()))
}

/// Like [`train`], calling `on_episode` after every episode.
pub fn train_with<F>(env_config: &EnvConfig, config: &PpoConfig, episodes: usize, seed: u64, mut on_episode: F) -> Result<TrainOutcome>
where
    F: FnMut(&EpisodeStats) -> Result<()>,
{
    let mut trainer = Trainer::new(env_config.clone(), config.clone(), seed)?;
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let stats = trainer.run_episode()?;
        on_episode(&stats)?;
        out.push(stats);
    }
    Ok(TrainOutcome {
        episodes: out,
        syncs: trainer.syncs,
        policies: trainer.policies,
    })
}

/// Mean cost per episode of fixed policies; `greedy` uses the policy mode.
pub fn evaluate(
    env_config: &EnvConfig,
    policies: &[PolicyNets],
    episodes: usize,
    seed: u64,
    greedy: bool,
) -> Result<Vec<f64>> {
    let env = Env::new(env_config.clone(), seed)?;
    let n = env.config.num_uavs;
    if policies.len() != 1 && policies.len() != n {
        return Err(Error::Contract(format!("expected 1 or {n} policies, got {}", policies.len())));
    }
    let net = |k: usize| &policies[if policies.len() == 1 { 0 } else { k }];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let mut costs = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let (mut world, mut obs) = env.reset_with(&mut rng);
        let mut states: Vec<Option<LstmState>> = (0..n).map(|k| net(k).initial_state()).collect();
        let mut sum = 0.0;
        for _ in 0..env.config.episode_len {
            let mut actions = Vec::with_capacity(n);
            for k in 0..n {
                let a = if greedy {
                    net(k).greedy_action(&mut states[k], &obs[k].features, &env.config)?
                } else {
                    net(k).sample_action(&mut states[k], &obs[k].features, &env.config, &mut rng)?.action
                };
                actions.push(a);
            }
            let step = env.step(&world, &actions)?;
            sum += step.cost;
            world = step.world;
            obs = step.observations;
        }
        costs.push(sum / env.config.episode_len as f64);
    }
    Ok(costs)
}
