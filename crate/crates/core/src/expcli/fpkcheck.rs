//! Fokker-Planck residual of closed-form solutions under grid refinement.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::meanfield::analytic::GaussianSolution;
use crate::meanfield::fpk::fpk_residual;
use crate::meanfield::GridSpec;
use crate::world::{Bounds, Vec2};
use crate::{Error, Result};

/// Default grid sizes per axis.
pub const RESOLUTIONS: [usize; 4] = [16, 32, 64, 128];

/// Time step as a fraction of the grid spacing.
pub const DT_PER_DX: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FpkCase {
    /// Gaussian carried at constant velocity, no diffusion.
    Translating,
    /// Gaussian spreading under pure diffusion.
    Diffusing,
}

impl FpkCase {
    pub const ALL: [FpkCase; 2] = [FpkCase::Translating, FpkCase::Diffusing];

    fn solution(self) -> GaussianSolution {
        match self {
            FpkCase::Translating => GaussianSolution::translating(Vec2::new(-1.0, -0.5), Vec2::new(1.0, 0.5), 1.0),
            FpkCase::Diffusing => GaussianSolution::diffusing(Vec2::ZERO, 1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpkRow {
    pub case: FpkCase,
    pub resolution: usize,
    pub dx: f64,
    pub dt: f64,
    pub residual: f64,
    /// Residual at the previous (coarser) resolution divided by this one.
    pub ratio: Option<f64>,
}

/// Residual of each closed-form case on `[-6, 6]²` at every resolution,
/// with two slices `dt = DT_PER_DX · dx` apart starting at `t = 0.5`.
pub fn fpk_convergence(resolutions: &[usize]) -> Result<Vec<FpkRow>> {
    let bounds = Bounds::new(Vec2::new(-6.0, -6.0), Vec2::new(6.0, 6.0));
    let t0 = 0.5;
    let mut rows = Vec::new();
    for case in FpkCase::ALL {
        let sol = case.solution();
        let mut previous: Option<f64> = None;
        for &n in resolutions {
            let spec = GridSpec::new(bounds, n, n);
            let dt = DT_PER_DX * spec.dx();
            let slices = [sol.grid(spec, t0)?, sol.grid(spec, t0 + dt)?];
            let residual = fpk_residual(&slices, &sol.velocity_field(spec), sol.sigma, dt)?;
            rows.push(FpkRow {
                case,
                resolution: n,
                dx: spec.dx(),
                dt,
                residual,
                ratio: previous.map(|p| p / residual),
            });
            previous = Some(residual);
        }
    }
    Ok(rows)
}

pub fn write_fpk_csv(path: &Path, rows: &[FpkRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
