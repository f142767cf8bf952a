//! Mean-field quantities of the swarm.
//!
//! The empirical measure of UAV positions is binned onto a regular grid
//! ([`DensityGrid`]); each agent also summarizes its neighbors into a
//! [`MeanFieldObservation`] fed to the learner. The [`fpk`] submodule checks
//! density sequences against the Fokker-Planck equation of the swarm
//! dynamics and [`analytic`] provides closed-form solutions to test it with.

pub mod analytic;
pub mod fpk;

pub use fpk::fpk_residual;

use serde::{Deserialize, Serialize};

use crate::mmdp::HybridAction;
use crate::world::{Bounds, Vec2, WorldState};
use crate::{Error, Result};

/// Regular `nx × ny` partition of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(bounds: Bounds, nx: usize, ny: usize) -> Self {
        GridSpec { bounds, nx, ny }
    }

    pub fn dx(&self) -> f64 {
        self.bounds.width() / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.bounds.height() / self.ny as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index (`iy * nx + ix`).
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.bounds.min.x + (ix as f64 + 0.5) * self.dx(),
            self.bounds.min.y + (iy as f64 + 0.5) * self.dy(),
        )
    }

    /// Cell holding `p`; points on the upper edge belong to the last cell.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        if !self.bounds.contains(p) {
            return None;
        }
        let ix = (((p.x - self.bounds.min.x) / self.dx()) as usize).min(self.nx - 1);
        let iy = (((p.y - self.bounds.min.y) / self.dy()) as usize).min(self.ny - 1);
        Some((ix, iy))
    }
}

/// Probability mass per grid cell. Entries are non-negative and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub mass: Vec<f64>,
}

impl DensityGrid {
    /// Wraps `mass`, checking shape, sign and normalization.
    pub fn from_mass(spec: GridSpec, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != spec.len() {
            return Err(Error::shape("density grid", spec.len(), mass.len()));
        }
        if mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::Contract("density mass must be non-negative".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!("density mass sums to {total}, expected 1")));
        }
        Ok(DensityGrid { spec, mass })
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass divided by cell area: a piecewise-constant density estimate.
    pub fn density(&self) -> Vec<f64> {
        let area = self.spec.dx() * self.spec.dy();
        self.mass.iter().map(|m| m / area).collect()
    }
}

/// Empirical measure of `positions` binned onto `spec`:
/// `mass[c] = #{i : positions[i] ∈ c} / N`.
pub fn empirical_density(positions: &[Vec2], spec: GridSpec) -> Result<DensityGrid> {
    if positions.is_empty() {
        return Err(Error::Contract("empirical density needs at least one position".into()));
    }
    if spec.nx == 0 || spec.ny == 0 {
        return Err(Error::Contract("density grid needs at least one cell per axis".into()));
    }
    let mut counts = vec![0usize; spec.len()];
    for &p in positions {
        let (ix, iy) = spec
            .cell_of(p)
            .ok_or_else(|| Error::Contract(format!("position ({}, {}) lies outside the grid", p.x, p.y)))?;
        counts[spec.index(ix, iy)] += 1;
    }
    let n = positions.len() as f64;
    Ok(DensityGrid {
        spec,
        mass: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Grid quadrature of `∫ c(ζ) m(ζ) dζ`.
pub fn mean_field_cost(cost_field: &[f64], density: &DensityGrid) -> Result<f64> {
    if cost_field.len() != density.mass.len() {
        return Err(Error::shape("mean-field cost field", density.mass.len(), cost_field.len()));
    }
    Ok(cost_field.iter().zip(&density.mass).map(|(c, m)| c * m).sum())
}

/// Which other UAVs count as neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Neighborhood {
    /// Every other UAV.
    All,
    /// Other UAVs within this horizontal distance in meters.
    Radius(f64),
}

/// Neighbor averages seen by one agent. Positions are in meters and
/// velocities in m/s; normalization happens when features are encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldObservation {
    pub mean_neighbor_pos: Vec2,
    pub mean_neighbor_vel: Vec2,
    /// Average one-hot of the neighbors' last scheduled sensor.
    pub mean_schedule: Vec<f64>,
    pub neighbor_count: usize,
}

impl MeanFieldObservation {
    pub fn empty(num_sensors: usize) -> Self {
        MeanFieldObservation {
            mean_neighbor_pos: Vec2::ZERO,
            mean_neighbor_vel: Vec2::ZERO,
            mean_schedule: vec![0.0; num_sensors],
            neighbor_count: 0,
        }
    }
}

/// Averages the position, velocity and last schedule of `agent`'s neighbors.
///
/// `last_actions[k]` is the action UAV `k` executed in the previous step,
/// `None` right after a reset. Neighbors without a previous action contribute
/// to position and velocity but not to the schedule average. With no
/// neighbors every field is zero.
pub fn neighbor_mean_field(
    agent: usize,
    world: &WorldState,
    last_actions: &[Option<HybridAction>],
    neighborhood: Neighborhood,
) -> Result<MeanFieldObservation> {
    let me = world
        .uavs
        .get(agent)
        .ok_or_else(|| Error::Contract(format!("unknown agent {agent}")))?;
    let num_sensors = world.sensors.len();
    let mut out = MeanFieldObservation::empty(num_sensors);
    let mut scheduled = 0usize;
    for (k, other) in world.uavs.iter().enumerate() {
        if k == agent {
            continue;
        }
        if let Neighborhood::Radius(r) = neighborhood {
            if other.position.distance(me.position) > r {
                continue;
            }
        }
        out.neighbor_count += 1;
        out.mean_neighbor_pos += other.position;
        out.mean_neighbor_vel += other.velocity;
        if let Some(Some(action)) = last_actions.get(k) {
            let slot = out.mean_schedule.get_mut(action.sensor_index).ok_or_else(|| {
                Error::Contract(format!("agent {k} scheduled unknown sensor {}", action.sensor_index))
            })?;
            *slot += 1.0;
            scheduled += 1;
        }
    }
    if out.neighbor_count > 0 {
        let inv = 1.0 / out.neighbor_count as f64;
        out.mean_neighbor_pos = out.mean_neighbor_pos * inv;
        out.mean_neighbor_vel = out.mean_neighbor_vel * inv;
    }
    if scheduled > 0 {
        let inv = 1.0 / scheduled as f64;
        out.mean_schedule.iter_mut().for_each(|s| *s *= inv);
    }
    Ok(out)
}

/// Monte-Carlo estimate of `∫ m g dζ` from particles, with its distance to a
/// known value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakFormEstimate {
    pub estimate: f64,
    pub abs_error: f64,
}

/// Evaluates the particle identity `∫ m(ζ) g(ζ) dζ = (1/N) Σ g(ζ_i)` for a
/// test function `g` and compares it with `analytic_integral`.
pub fn weak_form_check(samples: &[Vec2], g: impl Fn(Vec2) -> f64, analytic_integral: f64) -> WeakFormEstimate {
    let estimate = if samples.is_empty() {
        f64::NAN
    } else {
        samples.iter().map(|&p| g(p)).sum::<f64>() / samples.len() as f64
    };
    WeakFormEstimate {
        estimate,
        abs_error: (estimate - analytic_integral).abs(),
    }
}
