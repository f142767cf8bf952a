//! Finite-difference residual of the Fokker-Planck equation
//! `∂ₜm + ∇m·v − (σ²/2)∇²m = 0` (advective form).

use super::DensityGrid;
use crate::world::Vec2;
use crate::{Error, Result};

/// Discrete L2 norm of the Fokker-Planck residual over interior cells.
///
/// Consecutive slices `k, k+1` are combined at their temporal midpoint: the
/// time derivative is `(m_{k+1} − m_k)/dt` and the spatial operators act on
/// `(m_k + m_{k+1})/2` with second-order central differences, so the
/// residual of an exact solution is `O(dx² + dt²)`. Densities are recovered
/// as mass over cell area. The squared residual is integrated over the
/// interior (`Σ r² dx dy`) and averaged over slice pairs.
pub fn fpk_residual(density_seq: &[DensityGrid], velocity: &[Vec2], sigma: f64, dt: f64) -> Result<f64> {
    let first = density_seq
        .first()
        .ok_or_else(|| Error::Contract("residual needs at least two density slices".into()))?;
    if density_seq.len() < 2 {
        return Err(Error::Contract("residual needs at least two density slices".into()));
    }
    let spec = first.spec;
    if spec.nx < 3 || spec.ny < 3 {
        return Err(Error::Contract(format!(
            "grid too small for central differences: {}x{} (need at least 3x3)",
            spec.nx, spec.ny
        )));
    }
    if density_seq.iter().any(|g| g.spec != spec) {
        return Err(Error::Contract("density slices use different grids".into()));
    }
    if velocity.len() != spec.len() {
        return Err(Error::shape("velocity field", spec.len(), velocity.len()));
    }
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt must be positive, got {dt}")));
    }

    let (dx, dy) = (spec.dx(), spec.dy());
    let diffusion = 0.5 * sigma * sigma;
    let mut total = 0.0;
    for pair in density_seq.windows(2) {
        let now = pair[0].density();
        let next = pair[1].density();
        let mid: Vec<f64> = now.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
        let at = |ix: usize, iy: usize| mid[spec.index(ix, iy)];
        let mut sum_sq = 0.0;
        for iy in 1..spec.ny - 1 {
            for ix in 1..spec.nx - 1 {
                let c = spec.index(ix, iy);
                let dm_dt = (next[c] - now[c]) / dt;
                let dm_dx = (at(ix + 1, iy) - at(ix - 1, iy)) / (2.0 * dx);
                let dm_dy = (at(ix, iy + 1) - at(ix, iy - 1)) / (2.0 * dy);
                let lap = (at(ix + 1, iy) - 2.0 * mid[c] + at(ix - 1, iy)) / (dx * dx)
                    + (at(ix, iy + 1) - 2.0 * mid[c] + at(ix, iy - 1)) / (dy * dy);
                let r = dm_dt + dm_dx * velocity[c].x + dm_dy * velocity[c].y - diffusion * lap;
                sum_sq += r * r;
            }
        }
        total += sum_sq * dx * dy;
    }
    Ok((total / (density_seq.len() - 1) as f64).sqrt())
}
