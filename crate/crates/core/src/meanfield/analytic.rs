//! Closed-form solutions of the Fokker-Planck equation, used to validate the
//! residual diagnostic.

use super::{DensityGrid, GridSpec};
use crate::world::Vec2;
use crate::Result;

/// An isotropic Gaussian density whose center moves at `velocity` and whose
/// per-axis variance is `variance0 + sigma² t`. With `sigma = 0` it is a pure
/// translation `m(ζ, t) = m₀(ζ − v t)`; with `velocity = 0` it is the heat
/// kernel of `dζ = σ dW`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianSolution {
    pub center0: Vec2,
    pub velocity: Vec2,
    pub variance0: f64,
    pub sigma: f64,
}

impl GaussianSolution {
    pub fn translating(center0: Vec2, velocity: Vec2, std: f64) -> Self {
        GaussianSolution {
            center0,
            velocity,
            variance0: std * std,
            sigma: 0.0,
        }
    }

    pub fn diffusing(center: Vec2, std0: f64, sigma: f64) -> Self {
        GaussianSolution {
            center0: center,
            velocity: Vec2::ZERO,
            variance0: std0 * std0,
            sigma,
        }
    }

    pub fn density(&self, p: Vec2, t: f64) -> f64 {
        let var = self.variance0 + self.sigma * self.sigma * t;
        let d = p - (self.center0 + self.velocity * t);
        (-(d.dot(d)) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var)
    }

    /// The density sampled at cell centers and renormalized to unit mass.
    pub fn grid(&self, spec: GridSpec, t: f64) -> Result<DensityGrid> {
        let area = spec.dx() * spec.dy();
        let mut mass = Vec::with_capacity(spec.len());
        for iy in 0..spec.ny {
            for ix in 0..spec.nx {
                mass.push(self.density(spec.cell_center(ix, iy), t) * area);
            }
        }
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        DensityGrid::from_mass(spec, mass)
    }

    /// Constant per-cell velocity field of the solution.
    pub fn velocity_field(&self, spec: GridSpec) -> Vec<Vec2> {
        vec![self.velocity; spec.len()]
    }
}
