//! Entities, stochastic kinematics and age-of-information bookkeeping.
//!
//! UAVs move in the horizontal plane at a fixed altitude following
//! `dζ = v dt + σ dW`, discretized with an Euler-Maruyama step. Each ground
//! sensor carries one AoI value shared by all UAVs: whichever UAV collects a
//! fresh sample resets it.

use std::ops::{Add, AddAssign, Mul, Sub};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default lower speed bound in m/s.
pub const DEFAULT_V_MIN: f64 = 0.0;
/// Default upper speed bound in m/s.
pub const DEFAULT_V_MAX: f64 = 15.0;
/// Default flight altitude in meters.
pub const DEFAULT_ALTITUDE: f64 = 120.0;

/// A horizontal position or velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Axis-aligned rectangle in meters. Infinite extents are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Bounds { min, max }
    }

    /// `[0, width] × [0, height]`.
    pub fn area(width: f64, height: f64) -> Self {
        Bounds::new(Vec2::ZERO, Vec2::new(width, height))
    }

    pub fn unbounded() -> Self {
        Bounds::new(
            Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
            Vec2::new(f64::INFINITY, f64::INFINITY),
        )
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub id: usize,
    pub position: Vec2,
    /// Constant over an episode.
    pub altitude: f64,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorState {
    pub id: usize,
    /// Ground position; sensors sit at altitude zero.
    pub position: Vec2,
    /// Seconds since the freshest sample held by the swarm was generated.
    pub aoi: f64,
}

/// Complete simulation state. Cloning it, RNG included, forks an identical
/// future.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub step_index: u64,
    pub uavs: Vec<UavState>,
    pub sensors: Vec<SensorState>,
    pub rng: ChaCha8Rng,
    /// Step length in seconds.
    pub dt: f64,
    /// Diffusion coefficient in m/√s.
    pub sigma: f64,
    pub bounds: Bounds,
}

impl WorldState {
    /// Simulation clock; always `step_index × dt`.
    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn aois(&self) -> Vec<f64> {
        self.sensors.iter().map(|s| s.aoi).collect()
    }
}

/// Rescales `v_cmd` so its norm lies in `[v_min, v_max]`, keeping the
/// direction. The zero vector has no direction and is returned unchanged.
pub fn clamp_speed(v_cmd: Vec2, v_min: f64, v_max: f64) -> Vec2 {
    let speed = v_cmd.norm();
    if speed == 0.0 || !speed.is_finite() {
        return Vec2::ZERO;
    }
    let target = speed.clamp(v_min, v_max);
    if target == speed {
        v_cmd
    } else {
        v_cmd * (target / speed)
    }
}

/// One Euler-Maruyama step of `dζ = v dt + σ dW`.
///
/// `noise` holds two independent standard-normal draws; the Wiener increment
/// is `√dt · noise`. The new position is clamped into `bounds`.
pub fn step_kinematics(
    uav: &UavState,
    v_cmd: Vec2,
    dt: f64,
    sigma: f64,
    noise: Vec2,
    bounds: &Bounds,
) -> UavState {
    let diffusion = noise * (sigma * dt.sqrt());
    let position = bounds.clamp(uav.position + v_cmd * dt + diffusion);
    UavState {
        id: uav.id,
        position,
        altitude: uav.altitude,
        velocity: v_cmd,
    }
}

/// Ages every sensor by `dt`; sensors in `served` restart at `dt` instead
/// (the sample is generated at collection time). Repeated ids are harmless.
pub fn advance_aoi(sensors: &[SensorState], served: &[usize], dt: f64) -> Result<Vec<SensorState>> {
    let mut fresh = vec![false; sensors.len()];
    for &id in served {
        let slot = fresh
            .get_mut(id)
            .ok_or_else(|| Error::Contract(format!("unknown sensor id {id} (have {})", sensors.len())))?;
        *slot = true;
    }
    Ok(sensors
        .iter()
        .zip(fresh)
        .map(|(s, served)| SensorState {
            aoi: if served { dt } else { s.aoi + dt },
            ..s.clone()
        })
        .collect())
}

/// Mean AoI over sensors.
pub fn mean_aoi(sensors: &[SensorState]) -> Result<f64> {
    if sensors.is_empty() {
        return Err(Error::Contract("average AoI of an empty sensor set".into()));
    }
    Ok(sensors.iter().map(|s| s.aoi).sum::<f64>() / sensors.len() as f64)
}

/// The per-step cost: average AoI across sensors. With per-sensor AoI the
/// double average over UAVs and sensors collapses to this single mean.
pub fn average_aoi(world: &WorldState) -> Result<f64> {
    mean_aoi(&world.sensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn uav_at(x: f64, y: f64) -> UavState {
        UavState {
            id: 0,
            position: Vec2::new(x, y),
            altitude: DEFAULT_ALTITUDE,
            velocity: Vec2::ZERO,
        }
    }

    fn sensors(aois: &[f64]) -> Vec<SensorState> {
        aois.iter()
            .enumerate()
            .map(|(id, &aoi)| SensorState {
                id,
                position: Vec2::ZERO,
                aoi,
            })
            .collect()
    }

    #[test]
    fn clamp_speed_examples() {
        assert_eq!(clamp_speed(Vec2::new(20.0, 0.0), 0.0, 15.0), Vec2::new(15.0, 0.0));
        assert_eq!(clamp_speed(Vec2::new(3.0, 4.0), 0.0, 15.0), Vec2::new(3.0, 4.0));
        assert_eq!(clamp_speed(Vec2::ZERO, 0.0, 15.0), Vec2::ZERO);
        // raised lower bound
        let v = clamp_speed(Vec2::new(0.0, 1.0), 2.0, 15.0);
        assert!((v.y - 2.0).abs() < 1e-15 && v.x == 0.0);
    }

    #[test]
    fn kinematics_examples() {
        let b = Bounds::unbounded();
        let moved = step_kinematics(&uav_at(0.0, 0.0), Vec2::new(1.0, 0.0), 1.0, 0.0, Vec2::ZERO, &b);
        assert_eq!(moved.position, Vec2::new(1.0, 0.0));
        assert_eq!(moved.velocity, Vec2::new(1.0, 0.0));

        let still = step_kinematics(&uav_at(5.0, 5.0), Vec2::ZERO, 1.0, 0.0, Vec2::ZERO, &b);
        assert_eq!(still.position, Vec2::new(5.0, 5.0));

        let noisy = step_kinematics(
            &uav_at(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            1.0,
            2.0,
            Vec2::new(0.5, -0.5),
            &b,
        );
        assert_eq!(noisy.position, Vec2::new(2.0, -1.0));
        assert_eq!(noisy.altitude, DEFAULT_ALTITUDE);
    }

    #[test]
    fn kinematics_clamps_to_area() {
        let b = Bounds::area(200.0, 200.0);
        let out = step_kinematics(&uav_at(195.0, 2.0), Vec2::new(15.0, -15.0), 1.0, 0.0, Vec2::ZERO, &b);
        assert_eq!(out.position, Vec2::new(200.0, 0.0));
    }

    #[test]
    fn aoi_examples() {
        let s = advance_aoi(&sensors(&[3.0]), &[], 1.0).unwrap();
        assert_eq!(s[0].aoi, 4.0);
        let s = advance_aoi(&sensors(&[9.0]), &[0], 1.0).unwrap();
        assert_eq!(s[0].aoi, 1.0);
        let s = advance_aoi(&sensors(&[9.0, 2.0]), &[0, 0], 1.0).unwrap();
        assert_eq!(s[0].aoi, 1.0);
        assert_eq!(s[1].aoi, 3.0);
    }

    #[test]
    fn unknown_sensor_is_rejected() {
        let err = advance_aoi(&sensors(&[1.0, 1.0]), &[2], 1.0).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn mean_aoi_examples() {
        assert_eq!(mean_aoi(&sensors(&[2.0, 4.0])).unwrap(), 3.0);
        assert_eq!(mean_aoi(&sensors(&[7.0])).unwrap(), 7.0);
        assert_eq!(mean_aoi(&sensors(&[2.5; 9])).unwrap(), 2.5);
        assert!(mean_aoi(&[]).is_err());
    }

    #[test]
    fn wiener_increment_is_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (dt, sigma, v) = (1.0, 3.0, Vec2::new(2.0, -1.0));
        let n = 10_000;
        let b = Bounds::unbounded();
        let mut sum = Vec2::ZERO;
        let uav = uav_at(0.0, 0.0);
        for _ in 0..n {
            let noise = Vec2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            let next = step_kinematics(&uav, v, dt, sigma, noise, &b);
            sum += next.position - uav.position - v * dt;
        }
        let mean = sum * (1.0 / n as f64);
        let tol = 4.0 * sigma * (dt / n as f64).sqrt();
        assert!(mean.x.abs() <= tol && mean.y.abs() <= tol, "{mean:?} vs {tol}");
    }

    proptest! {
        #[test]
        fn clamped_speed_within_bounds(
            x in -100.0..100.0f64,
            y in -100.0..100.0f64,
            lo in 0.0..5.0f64,
            span in 0.1..20.0f64,
        ) {
            let hi = lo + span;
            let v = clamp_speed(Vec2::new(x, y), lo, hi);
            if x == 0.0 && y == 0.0 {
                prop_assert_eq!(v, Vec2::ZERO);
            } else {
                let n = v.norm();
                prop_assert!(n >= lo - 1e-12 && n <= hi + 1e-12);
                // same direction
                prop_assert!((v.x * y - v.y * x).abs() <= 1e-9 * (1.0 + n * Vec2::new(x, y).norm()));
                prop_assert!(v.dot(Vec2::new(x, y)) > 0.0);
            }
        }

        #[test]
        fn idle_step_adds_dt_to_mean(aois in prop::collection::vec(0.0..50.0f64, 1..20), dt in 0.1..2.0f64) {
            let before = sensors(&aois);
            let after = advance_aoi(&before, &[], dt).unwrap();
            let delta = mean_aoi(&after).unwrap() - mean_aoi(&before).unwrap();
            prop_assert!((delta - dt).abs() < 1e-9);
        }

        #[test]
        fn noiseless_kinematics_is_deterministic(vs in prop::collection::vec((-15.0..15.0f64, -15.0..15.0f64), 1..30)) {
            let b = Bounds::area(200.0, 200.0);
            let run = || {
                let mut u = uav_at(100.0, 100.0);
                for &(x, y) in &vs {
                    u = step_kinematics(&u, clamp_speed(Vec2::new(x, y), 0.0, 15.0), 1.0, 0.0, Vec2::ZERO, &b);
                }
                u
            };
            prop_assert_eq!(run(), run());
        }
    }
}
