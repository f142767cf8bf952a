//! Ground-sensor layouts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::world::{Bounds, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorDistribution {
    /// i.i.d. uniform over the area.
    Uniform,
    /// Regular lattice, one sensor per cell, jittered by ±2% of the cell size.
    Square,
    /// i.i.d. Gaussian around the area center with std = extent/6 per axis,
    /// resampled until inside the area.
    Normal,
}

/// Fraction of the lattice cell size used as jitter amplitude.
pub const LATTICE_JITTER: f64 = 0.02;

pub fn generate_scenario(distribution: SensorDistribution, count: usize, bounds: &Bounds, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_sensor_positions(distribution, count, bounds, &mut rng)
}

pub fn sample_sensor_positions<R: Rng + ?Sized>(
    distribution: SensorDistribution,
    count: usize,
    bounds: &Bounds,
    rng: &mut R,
) -> Vec<Vec2> {
    match distribution {
        SensorDistribution::Uniform => (0..count).map(|_| uniform_point(bounds, rng)).collect(),
        SensorDistribution::Normal => {
            let c = bounds.center();
            let nx = Normal::new(c.x, bounds.width() / 6.0).expect("finite std");
            let ny = Normal::new(c.y, bounds.height() / 6.0).expect("finite std");
            (0..count)
                .map(|_| loop {
                    let p = Vec2::new(nx.sample(rng), ny.sample(rng));
                    if bounds.contains(p) {
                        break p;
                    }
                })
                .collect()
        }
        SensorDistribution::Square => {
            let (cols, rows) = lattice_shape(count);
            let cw = bounds.width() / cols as f64;
            let ch = bounds.height() / rows as f64;
            (0..count)
                .map(|k| {
                    let (ix, iy) = (k % cols, k / cols);
                    let jx = rng.random_range(-LATTICE_JITTER..=LATTICE_JITTER) * cw;
                    let jy = rng.random_range(-LATTICE_JITTER..=LATTICE_JITTER) * ch;
                    Vec2::new(
                        bounds.min.x + (ix as f64 + 0.5) * cw + jx,
                        bounds.min.y + (iy as f64 + 0.5) * ch + jy,
                    )
                })
                .collect()
        }
    }
}

/// `(columns, rows)` of the smallest near-square lattice holding `count` points.
pub fn lattice_shape(count: usize) -> (usize, usize) {
    let cols = (count as f64).sqrt().ceil().max(1.0) as usize;
    let rows = count.div_ceil(cols).max(1);
    (cols, rows)
}

pub fn uniform_point<R: Rng + ?Sized>(bounds: &Bounds, rng: &mut R) -> Vec2 {
    Vec2::new(
        rng.random_range(bounds.min.x..=bounds.max.x),
        rng.random_range(bounds.min.y..=bounds.max.y),
    )
}
