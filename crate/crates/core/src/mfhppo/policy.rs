//! Hybrid-action policy: a shared recurrent trunk feeding a Gaussian head
//! for the flight command, a categorical head for the sensor choice and a
//! value head.

use rand::Rng;

use super::buffer::Trajectory;
use super::loss::{clipped_surrogate, combined_entropy, surrogate_is_unclipped, EntropyMode};
use crate::mmdp::{EnvConfig, HybridAction};
use crate::neural::dense::DenseCache;
use crate::neural::dist::{
    categorical_entropy, categorical_log_prob, categorical_sample, gaussian_entropy, gaussian_log_prob,
    gaussian_sample,
};
use crate::neural::{check_finite, Activation, Lstm, LstmState, Mlp, Parameterized, TensorMut, TensorRef};
use crate::world::Vec2;
use crate::{Error, Result};

/// Continuous action components: waypoint x, waypoint y, speed; each in `[-1, 1]`.
pub const CONTINUOUS_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNets {
    pub trunk: Option<Lstm>,
    /// Gaussian mean in normalized units (tanh output).
    pub actor_continuous: Mlp,
    /// State-independent log standard deviation.
    pub log_std: Vec<f64>,
    /// Logits over sensors.
    pub actor_discrete: Mlp,
    pub critic: Mlp,
}

/// Sizes of a [`PolicyNets`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyShape {
    pub input_dim: usize,
    pub num_sensors: usize,
    pub lstm_hidden: Option<usize>,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub log_std_init: f64,
}

/// Head outputs for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    pub mean: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledAction {
    pub action: HybridAction,
    pub raw_continuous: Vec<f64>,
    pub log_prob: f64,
    pub log_prob_continuous: f64,
    pub log_prob_discrete: f64,
    pub value: f64,
}

/// Scalars reported by one loss evaluation (means over the minibatch).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub clip: f64,
    pub value: f64,
    pub entropy: f64,
    /// Objective being maximized.
    pub objective: f64,
    pub clip_fraction: f64,
    pub samples: usize,
}

/// Training coefficients used by [`PolicyNets::loss_gradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip: f64,
    pub value: f64,
    pub entropy: f64,
    pub entropy_mode: EntropyMode,
}

/// Minibatch view over one agent trajectory.
pub struct SequenceBatch<'a> {
    pub trajectory: &'a Trajectory,
    /// Normalized advantages, one per step.
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
    /// Steps whose loss terms are included.
    pub selected: &'a [bool],
}

struct StepCache {
    mean: (Vec<f64>, Vec<DenseCache>),
    logits: (Vec<f64>, Vec<DenseCache>),
    value: (Vec<f64>, Vec<DenseCache>),
}

impl PolicyNets {
    pub fn new<R: Rng + ?Sized>(shape: PolicyShape, rng: &mut R) -> Self {
        let trunk = shape.lstm_hidden.map(|h| Lstm::new("lstm", shape.input_dim, h, rng));
        let head_in = shape.lstm_hidden.unwrap_or(shape.input_dim);
        let sizes = |out: usize| {
            let mut s = vec![head_in];
            s.extend(std::iter::repeat_n(shape.hidden_width, shape.hidden_layers));
            s.push(out);
            s
        };
        PolicyNets {
            trunk,
            actor_continuous: Mlp::new("actor_continuous", &sizes(CONTINUOUS_DIM), Activation::Relu, Activation::Tanh, rng),
            log_std: vec![shape.log_std_init; CONTINUOUS_DIM],
            actor_discrete: Mlp::new("actor_discrete", &sizes(shape.num_sensors), Activation::Relu, Activation::Identity, rng),
            critic: Mlp::new("critic", &sizes(1), Activation::Relu, Activation::Identity, rng),
        }
    }

    pub fn initial_state(&self) -> Option<LstmState> {
        self.trunk.as_ref().map(Lstm::initial_state)
    }

    fn trunk_features(&self, state: &mut Option<LstmState>, features: &[f64]) -> Result<Vec<f64>> {
        match (&self.trunk, state.as_mut()) {
            (Some(l), Some(s)) => l.step(s, features),
            (None, _) => Ok(features.to_vec()),
            (Some(_), None) => Err(Error::Contract("recurrent policy needs a state".into())),
        }
    }

    /// Advances the recurrent state and evaluates every head.
    pub fn forward(&self, state: &mut Option<LstmState>, features: &[f64]) -> Result<HeadOutput> {
        let z = self.trunk_features(state, features)?;
        Ok(HeadOutput {
            mean: self.actor_continuous.forward(&z)?,
            logits: self.actor_discrete.forward(&z)?,
            value: self.critic.forward(&z)?[0],
        })
    }

    /// Value of `features` without committing the recurrent state.
    pub fn peek_value(&self, state: &Option<LstmState>, features: &[f64]) -> Result<f64> {
        let mut s = state.clone();
        let z = self.trunk_features(&mut s, features)?;
        Ok(self.critic.forward(&z)?[0])
    }

    /// Samples a hybrid action. The log-probability is evaluated at the
    /// unclamped Gaussian sample; clamping happens when mapping to the action.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        state: &mut Option<LstmState>,
        features: &[f64],
        env: &EnvConfig,
        rng: &mut R,
    ) -> Result<SampledAction> {
        let out = self.forward(state, features)?;
        let raw = gaussian_sample(&out.mean, &self.log_std, rng);
        check_finite(&raw, || "actor_continuous.sample".into())?;
        let k = categorical_sample(&out.logits, rng);
        let (lp_c, _, _) = gaussian_log_prob(&raw, &out.mean, &self.log_std);
        let (lp_d, _) = categorical_log_prob(&out.logits, k);
        Ok(SampledAction {
            action: to_action(&raw, k, env),
            raw_continuous: raw,
            log_prob: lp_c + lp_d,
            log_prob_continuous: lp_c,
            log_prob_discrete: lp_d,
            value: out.value,
        })
    }

    /// Mode of the policy: Gaussian mean and most likely sensor.
    pub fn greedy_action(&self, state: &mut Option<LstmState>, features: &[f64], env: &EnvConfig) -> Result<HybridAction> {
        let out = self.forward(state, features)?;
        let k = argmax(&out.logits);
        Ok(to_action(&out.mean, k, env))
    }

    /// Log-probabilities of the stored actions of `trajectory` under these parameters.
    pub fn log_probs(&self, trajectory: &Trajectory) -> Result<Vec<f64>> {
        let mut state = trajectory.start_state.clone().or_else(|| self.initial_state());
        trajectory
            .steps
            .iter()
            .map(|t| {
                let out = self.forward(&mut state, &t.features)?;
                let (lp_c, _, _) = gaussian_log_prob(&t.raw_continuous, &out.mean, &self.log_std);
                let (lp_d, _) = categorical_log_prob(&out.logits, t.action.sensor_index);
                Ok(lp_c + lp_d)
            })
            .collect()
    }

    /// Loss `−objective` over the selected steps of `batches` and its
    /// parameter gradient, backpropagated through time. Each selected step
    /// is weighted by `1 / total selected`.
    pub fn loss_gradient(&self, batches: &[SequenceBatch<'_>], coef: LossCoefficients) -> Result<(LossParts, PolicyNets)> {
        let mut grad = self.zeroed();
        let total: usize = batches.iter().map(|b| b.selected.iter().filter(|&&s| s).count()).sum();
        let mut parts = LossParts {
            samples: total,
            ..LossParts::default()
        };
        if total == 0 {
            return Ok((parts, grad));
        }
        let w = 1.0 / total as f64;
        let h_c = gaussian_entropy(&self.log_std);
        let mut clipped = 0usize;

        for batch in batches {
            let steps = &batch.trajectory.steps;
            let Some(last) = batch.selected.iter().rposition(|&s| s) else {
                continue;
            };
            let mut state = batch.trajectory.start_state.clone().or_else(|| self.initial_state());
            let mut trunk_caches = Vec::with_capacity(last + 1);
            let mut d_trunk_out: Vec<Vec<f64>> = Vec::with_capacity(last + 1);
            for t in 0..=last {
                let z = match (&self.trunk, state.as_mut()) {
                    (Some(l), Some(s)) => {
                        let (next, c) = l.step_cached(s, &steps[t].features)?;
                        *s = next;
                        trunk_caches.push(c);
                        s.hidden.clone()
                    }
                    _ => steps[t].features.clone(),
                };
                if !batch.selected[t] {
                    d_trunk_out.push(vec![0.0; z.len()]);
                    continue;
                }
                let cache = StepCache {
                    mean: self.actor_continuous.forward_cached(&z)?,
                    logits: self.actor_discrete.forward_cached(&z)?,
                    value: self.critic.forward_cached(&z)?,
                };
                let tr = &steps[t];
                let (mean, logits, value) = (&cache.mean.0, &cache.logits.0, cache.value.0[0]);
                let (lp_c, d_mean_lp, d_logstd_lp) = gaussian_log_prob(&tr.raw_continuous, mean, &self.log_std);
                let (lp_d, d_logits_lp) = categorical_log_prob(logits, tr.action.sensor_index);
                let (h_d, d_logits_h) = categorical_entropy(logits);
                let adv = batch.advantages[t];
                let ratio = (lp_c + lp_d - tr.log_prob).exp();
                let surrogate = clipped_surrogate(ratio, adv, coef.clip);
                let unclipped = surrogate_is_unclipped(ratio, adv, coef.clip);
                if !unclipped {
                    clipped += 1;
                }
                let v_err = value - batch.returns[t];
                let entropy = combined_entropy(h_c, h_d, coef.entropy_mode);
                parts.clip += w * surrogate;
                parts.value += w * v_err * v_err;
                parts.entropy += w * entropy;

                // gradients of the loss (= −objective), scaled by w
                let d_lp = if unclipped { -w * ratio * adv } else { 0.0 };
                let (d_hc, d_hd) = match coef.entropy_mode {
                    EntropyMode::Product => (-w * coef.entropy * h_d, -w * coef.entropy * h_c),
                    EntropyMode::Sum => (-w * coef.entropy, -w * coef.entropy),
                };
                let d_mean: Vec<f64> = d_mean_lp.iter().map(|g| d_lp * g).collect();
                for i in 0..CONTINUOUS_DIM {
                    grad.log_std[i] += d_lp * d_logstd_lp[i] + d_hc;
                }
                let d_logits: Vec<f64> = d_logits_lp
                    .iter()
                    .zip(&d_logits_h)
                    .map(|(a, b)| d_lp * a + d_hd * b)
                    .collect();
                let d_value = [w * coef.value * 2.0 * v_err];

                let mut dz = self.actor_continuous.backward(&cache.mean.1, &d_mean, &mut grad.actor_continuous);
                let dz_d = self.actor_discrete.backward(&cache.logits.1, &d_logits, &mut grad.actor_discrete);
                let dz_v = self.critic.backward(&cache.value.1, &d_value, &mut grad.critic);
                for ((a, b), c) in dz.iter_mut().zip(&dz_d).zip(&dz_v) {
                    *a += b + c;
                }
                d_trunk_out.push(dz);
            }
            if let (Some(l), Some(g)) = (&self.trunk, grad.trunk.as_mut()) {
                let h = l.hidden_dim;
                let mut dh_next = vec![0.0; h];
                let mut dc_next = vec![0.0; h];
                for t in (0..=last).rev() {
                    let dh: Vec<f64> = d_trunk_out[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                    let (_, dhp, dcp) = l.backward_step(&trunk_caches[t], &dh, &dc_next, g);
                    dh_next = dhp;
                    dc_next = dcp;
                }
            }
        }
        parts.clip_fraction = clipped as f64 / total as f64;
        parts.objective = super::loss::total_loss(parts.clip, parts.value, parts.entropy, coef.value, coef.entropy);
        if !parts.objective.is_finite() {
            return Err(Error::NonFinite { layer: "objective".into() });
        }
        Ok((parts, grad))
    }

    /// Keeps the log standard deviation inside `[lo, hi]`.
    pub fn clamp_log_std(&mut self, lo: f64, hi: f64) {
        self.log_std.iter_mut().for_each(|s| *s = s.clamp(lo, hi));
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Maps normalized continuous components (clamped to `[-1, 1]`) to a flight command.
pub fn to_action(raw: &[f64], sensor_index: usize, env: &EnvConfig) -> HybridAction {
    let c = |v: f64| v.clamp(-1.0, 1.0);
    let max_offset = env.max_offset();
    HybridAction {
        sensor_index,
        waypoint_offset: Vec2::new(c(raw[0]) * max_offset, c(raw[1]) * max_offset),
        speed: env.v_min + 0.5 * (c(raw[2]) + 1.0) * (env.v_max - env.v_min),
    }
}

impl Parameterized for PolicyNets {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = self.trunk.as_ref().map(Lstm::tensors).unwrap_or_default();
        out.extend(self.actor_continuous.tensors());
        out.push(TensorRef::new("log_std".into(), vec![self.log_std.len()], &self.log_std));
        out.extend(self.actor_discrete.tensors());
        out.extend(self.critic.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = self.trunk.as_mut().map(Lstm::tensors_mut).unwrap_or_default();
        out.extend(self.actor_continuous.tensors_mut());
        let n = self.log_std.len();
        out.push(TensorMut::new("log_std".into(), vec![n], &mut self.log_std));
        out.extend(self.actor_discrete.tensors_mut());
        out.extend(self.critic.tensors_mut());
        out
    }

    fn zeroed(&self) -> Self {
        PolicyNets {
            trunk: self.trunk.as_ref().map(Lstm::zeroed),
            actor_continuous: self.actor_continuous.zeroed(),
            log_std: vec![0.0; self.log_std.len()],
            actor_discrete: self.actor_discrete.zeroed(),
            critic: self.critic.zeroed(),
        }
    }
}
