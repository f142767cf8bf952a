//! Advantage estimation and the pieces of the PPO objective.

use serde::{Deserialize, Serialize};

/// How the continuous and discrete policy entropies are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyMode {
    /// `H = H_continuous · H_discrete`. The Gaussian's differential entropy
    /// can be negative, in which case maximizing the product pushes the
    /// discrete entropy down.
    Product,
    /// `H = H_continuous + H_discrete`, the entropy of the joint policy.
    Sum,
}

pub fn combined_entropy(h_continuous: f64, h_discrete: f64, mode: EntropyMode) -> f64 {
    match mode {
        EntropyMode::Product => h_continuous * h_discrete,
        EntropyMode::Sum => h_continuous + h_discrete,
    }
}

/// Generalized advantage estimation with `reward = −cost`.
///
/// `values` has one more entry than `costs`: the last is the bootstrap value
/// of the state following the final step. `dones[t]` marks the last step of
/// an episode, after which nothing is bootstrapped. Returns
/// `(advantages, returns)` with `returns = advantages + values[..n]`.
pub fn gae(costs: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = costs.len();
    assert_eq!(values.len(), n + 1, "values need a bootstrap entry");
    assert_eq!(dones.len(), n, "one done flag per step");
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = -costs[t] + gamma * values[t + 1] * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit standard deviation. Constant
/// inputs are only centered.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = if std > 1e-12 { 1.0 / std } else { 1.0 };
    adv.iter_mut().for_each(|a| *a = (*a - mean) * scale);
}

/// `min(r·A, g(ε, A))` where `g = (1+ε)A` for `A ≥ 0` and `(1−ε)A` otherwise.
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    (ratio * advantage).min(clip_bound(advantage, epsilon))
}

fn clip_bound(advantage: f64, epsilon: f64) -> f64 {
    if advantage >= 0.0 {
        (1.0 + epsilon) * advantage
    } else {
        (1.0 - epsilon) * advantage
    }
}

/// Whether the unclipped branch `r·A` is the one selected (and so carries
/// gradient with respect to the new log-probability).
pub fn surrogate_is_unclipped(ratio: f64, advantage: f64, epsilon: f64) -> bool {
    ratio * advantage <= clip_bound(advantage, epsilon)
}

/// Minibatch mean of the clipped surrogate.
pub fn ppo_clip_loss(log_prob_new: &[f64], log_prob_old: &[f64], advantage: &[f64], epsilon: f64) -> f64 {
    assert!(epsilon > 0.0, "clip threshold must be positive");
    let n = log_prob_new.len();
    assert!(n == log_prob_old.len() && n == advantage.len(), "aligned minibatch");
    if n == 0 {
        return 0.0;
    }
    log_prob_new
        .iter()
        .zip(log_prob_old)
        .zip(advantage)
        .map(|((new, old), a)| clipped_surrogate((new - old).exp(), *a, epsilon))
        .sum::<f64>()
        / n as f64
}

/// Objective to maximize: `clip − value_coef·value_loss + entropy_coef·entropy`.
/// Training minimizes its negation.
pub fn total_loss(clip_term: f64, value_loss: f64, entropy: f64, value_coef: f64, entropy_coef: f64) -> f64 {
    clip_term - value_coef * value_loss + entropy_coef * entropy
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_recursion_case() {
        // rewards 1,1,1 ⇒ costs −1; terminal bootstrap 0
        let (adv, ret) = gae(&[-1.0; 3], &[0.5, 0.5, 0.5, 0.0], &[false; 3], 0.9, 0.5);
        let d2 = 1.0 - 0.5;
        let d1 = 1.0 + 0.9 * 0.5 - 0.5;
        let d0 = d1;
        let a2 = d2;
        let a1 = d1 + 0.45 * a2;
        let a0 = d0 + 0.45 * a1;
        for (x, y) in adv.iter().zip([a0, a1, a2]) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((ret[0] - (a0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn lambda_one_is_return_minus_value() {
        let costs = [2.0, 1.0, 3.0, 0.5];
        let values = [0.3, -0.2, 0.7, 1.1, 0.0];
        let (adv, _) = gae(&costs, &values, &[false, false, false, true], 0.95, 1.0);
        for t in 0..4 {
            let mut g = 0.0;
            for k in (t..4).rev() {
                g = -costs[k] + 0.95 * g;
            }
            assert!((adv[t] - (g - values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_zero_is_td_residual() {
        let costs = [2.0, 1.0, 3.0];
        let values = [0.3, -0.2, 0.7, 1.1];
        let (adv, _) = gae(&costs, &values, &[false; 3], 0.9, 0.0);
        for t in 0..3 {
            assert!((adv[t] - (-costs[t] + 0.9 * values[t + 1] - values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn episode_boundary_stops_bootstrap() {
        let (adv, _) = gae(&[1.0, 1.0], &[0.0, 5.0, 7.0], &[true, false], 0.9, 0.9);
        assert_eq!(adv[0], -1.0);
    }

    #[test]
    fn clip_examples() {
        for a in [-2.0, 0.0, 3.0] {
            assert_eq!(clipped_surrogate(1.0, a, 0.2), a);
        }
        assert_eq!(clipped_surrogate(2.0, 1.5, 0.2), 1.2 * 1.5);
        assert_eq!(clipped_surrogate(0.5, -1.5, 0.2), 0.8 * -1.5);
    }

    #[test]
    fn product_entropy_example() {
        assert_eq!(combined_entropy(2.0, 0.5, EntropyMode::Product), 1.0);
        assert_eq!(combined_entropy(2.0, 0.5, EntropyMode::Sum), 2.5);
    }

    #[test]
    fn entropy_coefficient_zero_ignores_entropy() {
        assert_eq!(total_loss(0.4, 2.0, 1e6, 0.2, 0.0), total_loss(0.4, 2.0, -3.0, 0.2, 0.0));
        assert_eq!(total_loss(1.0, 2.0, 0.5, 0.2, 3.0), 1.0 - 0.4 + 1.5);
    }

    #[test]
    fn clip_is_flat_outside_band_on_clipped_side() {
        let eps = 0.2;
        for &a in &[1.0, -1.0] {
            let grid: Vec<f64> = (0..400).map(|k| 0.01 * k as f64).collect();
            for &r in &grid {
                let v = clipped_surrogate(r, a, eps);
                if a > 0.0 && r >= 1.0 + eps {
                    assert_eq!(v, (1.0 + eps) * a);
                }
                if a < 0.0 && r <= 1.0 - eps {
                    assert_eq!(v, (1.0 - eps) * a);
                }
                if (1.0 - eps..=1.0 + eps).contains(&r) {
                    assert_eq!(v, r * a);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn normalized_advantages_are_standard(adv in prop::collection::vec(-100.0..100.0f64, 2..200)) {
            let distinct = adv.iter().any(|&a| (a - adv[0]).abs() > 1e-6);
            let mut a = adv.clone();
            normalize_advantages(&mut a);
            let n = a.len() as f64;
            let mean = a.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-6);
            if distinct {
                let std = (a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
                prop_assert!((0.99..=1.01).contains(&std));
            }
        }
    }
}
