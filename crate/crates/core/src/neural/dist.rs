//! Log-densities and entropies of the policy heads, with their gradients.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// `log p(k)` and its gradient with respect to the logits.
pub fn categorical_log_prob(logits: &[f64], k: usize) -> (f64, Vec<f64>) {
    let lp = log_softmax(logits);
    let grad = lp
        .iter()
        .enumerate()
        .map(|(i, l)| if i == k { 1.0 } else { 0.0 } - l.exp())
        .collect();
    (lp[k], grad)
}

/// Shannon entropy in nats and its gradient with respect to the logits.
pub fn categorical_entropy(logits: &[f64]) -> (f64, Vec<f64>) {
    let lp = log_softmax(logits);
    let h: f64 = -lp.iter().map(|l| l.exp() * l).sum::<f64>();
    let grad = lp.iter().map(|l| -l.exp() * (l + h)).collect();
    (h, grad)
}

pub fn categorical_sample<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> usize {
    let lp = log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, l) in lp.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return i;
        }
    }
    lp.len() - 1
}

/// Diagonal Gaussian log-density with gradients `(∂/∂mean, ∂/∂log_std)`.
pub fn gaussian_log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let mut lp = 0.0;
    let mut d_mean = Vec::with_capacity(x.len());
    let mut d_log_std = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let var = (2.0 * log_std[i]).exp();
        let diff = x[i] - mean[i];
        lp += -0.5 * diff * diff / var - log_std[i] - 0.5 * LN_2PI;
        d_mean.push(diff / var);
        d_log_std.push(diff * diff / var - 1.0);
    }
    (lp, d_mean, d_log_std)
}

/// Differential entropy; its gradient with respect to each log-std is 1.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| 0.5 * (1.0 + LN_2PI) + s).sum()
}

pub fn gaussian_sample<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, s)| {
            let n: f64 = StandardNormal.sample(rng);
            m + s.exp() * n
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_gaussian_at_mean() {
        for k in 1..4 {
            let (lp, _, _) = gaussian_log_prob(&vec![0.0; k], &vec![0.0; k], &vec![0.0; k]);
            assert!((lp + 0.5 * k as f64 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_categorical_entropy() {
        let (h, g) = categorical_entropy(&[0.3; 8]);
        assert!((h - 8f64.ln()).abs() < 1e-12);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn extreme_logits_always_pick_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hits = (0..10_000)
            .filter(|_| categorical_sample(&[50.0, -50.0], &mut rng) == 0)
            .count();
        assert_eq!(hits, 10_000);
    }

    #[test]
    fn gradients_match_differences() {
        let logits = [0.2, -1.0, 0.7, 0.1];
        let h = 1e-6;
        let (_, g) = categorical_log_prob(&logits, 2);
        let (_, ge) = categorical_entropy(&logits);
        for i in 0..4 {
            let mut p = logits;
            let mut m = logits;
            p[i] += h;
            m[i] -= h;
            let fd = (categorical_log_prob(&p, 2).0 - categorical_log_prob(&m, 2).0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
            let fde = (categorical_entropy(&p).0 - categorical_entropy(&m).0) / (2.0 * h);
            assert!((fde - ge[i]).abs() < 1e-8);
        }
        let (x, mu, s) = ([0.4, -0.3], [0.1, 0.2], [-0.5, 0.3]);
        let (_, dm, ds) = gaussian_log_prob(&x, &mu, &s);
        for i in 0..2 {
            let (mut a, mut b) = (mu, mu);
            a[i] += h;
            b[i] -= h;
            let fd = (gaussian_log_prob(&x, &a, &s).0 - gaussian_log_prob(&x, &b, &s).0) / (2.0 * h);
            assert!((fd - dm[i]).abs() < 1e-8);
            let (mut a, mut b) = (s, s);
            a[i] += h;
            b[i] -= h;
            let fd = (gaussian_log_prob(&x, &mu, &a).0 - gaussian_log_prob(&x, &mu, &b).0) / (2.0 * h);
            assert!((fd - ds[i]).abs() < 1e-8);
        }
    }
}
