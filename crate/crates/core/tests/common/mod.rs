//! Central finite-difference checks shared by the gradient tests and the
//! acceptance suite.

#![allow(dead_code)]

use aoi_swarm::meanfield::MeanFieldObservation;
use aoi_swarm::mfhppo::policy::{PolicyNets, PolicyShape, SequenceBatch, LossCoefficients};
use aoi_swarm::mfhppo::{EntropyMode, Trajectory, Transition};
use aoi_swarm::mmdp::HybridAction;
use aoi_swarm::neural::{gradients, Activation, LstmState, Parameterized, SequenceModel};
use aoi_swarm::world::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;

/// Relative error with a denominator floor of 1e-5: with losses of order 10,
/// central differences at this step carry roughly 1e-10 of rounding noise,
/// which would dominate coordinates whose gradient is itself near zero.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Largest relative error between `grad` and central differences of `loss`.
fn check<P: Parameterized + Clone>(model: &P, grad: &P, loss: impl Fn(&P) -> f64) -> f64 {
    let base = model.flat();
    let g = grad.flat();
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for i in 0..base.len() {
        let mut v = base.clone();
        v[i] = base[i] + H;
        probe.set_flat(&v).unwrap();
        let up = loss(&probe);
        v[i] = base[i] - H;
        probe.set_flat(&v).unwrap();
        let down = loss(&probe);
        let fd = (up - down) / (2.0 * H);
        worst = worst.max(rel_err(g[i], fd));
    }
    worst
}

/// Moves every parameter, biases included, off its initial value so no
/// ReLU sits exactly on its kink.
fn jitter<P: Parameterized>(model: &mut P, rng: &mut ChaCha8Rng) {
    let v: Vec<f64> = model.flat().iter().map(|x| x + rng.random_range(-0.3..0.3)).collect();
    model.set_flat(&v).unwrap();
}

fn sequence(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..len).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn sequence_case(seed: u64, lstm: Option<usize>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = SequenceModel::new(4, lstm, &[6, 3], Activation::Tanh, Activation::Identity, &mut rng);
    jitter(&mut model, &mut rng);
    let xs = sequence(&mut rng, 5, 4);
    let targets = sequence(&mut rng, 5, 3);
    let loss_fn = |t: usize, y: &[f64]| {
        let d: Vec<f64> = y.iter().zip(&targets[t]).map(|(a, b)| 2.0 * (a - b)).collect();
        (y.iter().zip(&targets[t]).map(|(a, b)| (a - b) * (a - b)).sum(), d)
    };
    let (_, grad) = gradients(&model, &xs, loss_fn).unwrap();
    check(&model, &grad, |m| gradients(m, &xs, loss_fn).unwrap().0)
}

fn policy_trajectory(rng: &mut ChaCha8Rng, policy: &PolicyNets, len: usize, dim: usize, sensors: usize) -> Trajectory {
    let steps = (0..len)
        .map(|t| Transition {
            features: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            mean_field: MeanFieldObservation::empty(sensors),
            action: HybridAction { sensor_index: rng.random_range(0..sensors), waypoint_offset: Vec2::ZERO, speed: 0.0 },
            raw_continuous: (0..3).map(|_| rng.random_range(-1.2..1.2)).collect(),
            cost: 0.0,
            // stored log-probs chosen so ratios land on both sides of the clip band
            log_prob: rng.random_range(-6.0..-2.0),
            log_prob_continuous: 0.0,
            log_prob_discrete: 0.0,
            value: 0.0,
            done: t + 1 == len,
        })
        .collect();
    Trajectory { start_state: policy.initial_state().map(|s: LstmState| s), steps, bootstrap_value: 0.0 }
}

pub fn policy_case(seed: u64, lstm: Option<usize>, mode: EntropyMode) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dim, sensors) = (5, 4);
    let shape = PolicyShape { input_dim: dim, num_sensors: sensors, lstm_hidden: lstm, hidden_width: 6, hidden_layers: 2, log_std_init: -0.4 };
    let mut policy = PolicyNets::new(shape, &mut rng);
    jitter(&mut policy, &mut rng);
    let trajs: Vec<Trajectory> = (0..2).map(|_| policy_trajectory(&mut rng, &policy, 5, dim, sensors)).collect();
    let advs: Vec<Vec<f64>> = (0..2).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let rets: Vec<Vec<f64>> = (0..2).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let masks = [vec![true, false, true, true, false], vec![false, true, true, false, true]];
    let coef = LossCoefficients { clip: 0.2, value: 0.2, entropy: 3.0, entropy_mode: mode };
    let loss = |p: &PolicyNets| {
        let batches: Vec<SequenceBatch> = (0..2)
            .map(|k| SequenceBatch { trajectory: &trajs[k], advantages: &advs[k], returns: &rets[k], selected: &masks[k] })
            .collect();
        p.loss_gradient(&batches, coef).unwrap()
    };
    let (_, grad) = loss(&policy);
    check(&policy, &grad, |p| -loss(p).0.objective)
}
