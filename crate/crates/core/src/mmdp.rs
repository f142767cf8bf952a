//! The multi-agent environment.
//!
//! Every step each UAV picks one ground sensor and a flight command. The UAV
//! flies first, then beacons the chosen sensor; the sensor uploads and the
//! UAV acknowledges, all within the step. A sensor is refreshed when at least
//! one upload addressed to it succeeds. The shared cost is the average AoI
//! after the step; learners use `reward = −cost`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, TransmissionOutcome};
use crate::expcli::scenario::{sample_sensor_positions, uniform_point, SensorDistribution};
use crate::meanfield::{neighbor_mean_field, MeanFieldObservation, Neighborhood};
use crate::world::{
    self, average_aoi, step_kinematics, Bounds, SensorState, UavState, Vec2, WorldState, DEFAULT_ALTITUDE,
    DEFAULT_V_MAX, DEFAULT_V_MIN,
};
use crate::{Error, Result};

/// Per-UAV action: a discrete sensor choice plus a continuous flight command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridAction {
    pub sensor_index: usize,
    /// Waypoint relative to the current position; only its direction is
    /// used to steer. Each axis is bounded by the configured maximum offset.
    pub waypoint_offset: Vec2,
    /// Commanded speed in m/s, clamped into `[v_min, v_max]` on execution.
    pub speed: f64,
}

impl HybridAction {
    /// Velocity flown for this action: heading toward the waypoint at the
    /// clamped speed. A zero offset means hover.
    pub fn velocity_command(&self, v_min: f64, v_max: f64) -> Vec2 {
        let len = self.waypoint_offset.norm();
        if len == 0.0 {
            return Vec2::ZERO;
        }
        let speed = self.speed.clamp(v_min, v_max);
        world::clamp_speed(self.waypoint_offset * (speed / len), v_min, v_max)
    }

    fn validate(&self, num_sensors: usize) -> Result<()> {
        if self.sensor_index >= num_sensors {
            return Err(Error::Contract(format!(
                "action schedules sensor {} but only {num_sensors} exist",
                self.sensor_index
            )));
        }
        if !self.waypoint_offset.is_finite() || !self.speed.is_finite() {
            return Err(Error::Contract("action has non-finite continuous components".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub num_uavs: usize,
    pub num_sensors: usize,
    pub area_width: f64,
    pub area_height: f64,
    pub altitude: f64,
    pub dt: f64,
    /// Diffusion coefficient of the position noise, m/√s.
    pub sigma: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Per-axis bound on the waypoint offset; `v_max · dt` when unset.
    pub max_offset: Option<f64>,
    /// Steps per episode.
    pub episode_len: usize,
    pub sensor_distribution: SensorDistribution,
    /// AoI normalization scale for observations; `40 · dt` when unset.
    pub aoi_scale: Option<f64>,
    /// Mean-field neighborhood radius in meters; all other UAVs when unset.
    pub neighbor_radius: Option<f64>,
    pub channel: ChannelParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            num_uavs: 30,
            num_sensors: 100,
            area_width: 1000.0,
            area_height: 1000.0,
            altitude: DEFAULT_ALTITUDE,
            dt: 1.0,
            sigma: 1.0,
            v_min: DEFAULT_V_MIN,
            v_max: DEFAULT_V_MAX,
            max_offset: None,
            episode_len: 40,
            sensor_distribution: SensorDistribution::Uniform,
            aoi_scale: None,
            neighbor_radius: None,
            channel: ChannelParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_uavs == 0 {
            return fail("num_uavs must be at least 1".into());
        }
        if self.num_sensors == 0 {
            return fail("num_sensors must be at least 1".into());
        }
        if !(self.area_width > 0.0 && self.area_height > 0.0) {
            return fail("area dimensions must be positive".into());
        }
        if !(self.altitude > 0.0) {
            return fail("altitude must be positive".into());
        }
        if !(self.dt > 0.0) {
            return fail("dt must be positive".into());
        }
        if !(self.sigma >= 0.0) {
            return fail("sigma must be non-negative".into());
        }
        if !(self.v_min >= 0.0 && self.v_max > self.v_min) {
            return fail(format!("speed bounds must satisfy 0 <= v_min < v_max, got [{}, {}]", self.v_min, self.v_max));
        }
        if self.episode_len == 0 {
            return fail("episode_len must be at least 1".into());
        }
        if let Some(m) = self.max_offset {
            if !(m > 0.0) {
                return fail("max_offset must be positive".into());
            }
        }
        if let Some(s) = self.aoi_scale {
            if !(s > 0.0) {
                return fail("aoi_scale must be positive".into());
            }
        }
        if let Some(r) = self.neighbor_radius {
            if !(r >= 0.0) {
                return fail("neighbor_radius must be non-negative".into());
            }
        }
        self.channel.validate().map_err(Error::Config)
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::area(self.area_width, self.area_height)
    }

    pub fn max_offset(&self) -> f64 {
        self.max_offset.unwrap_or(self.v_max * self.dt)
    }

    pub fn aoi_scale(&self) -> f64 {
        self.aoi_scale.unwrap_or(40.0 * self.dt)
    }

    pub fn neighborhood(&self) -> Neighborhood {
        match self.neighbor_radius {
            Some(r) => Neighborhood::Radius(r),
            None => Neighborhood::All,
        }
    }

    pub fn norms(&self) -> ObservationNorms {
        ObservationNorms {
            bounds: self.bounds(),
            aoi_scale: self.aoi_scale(),
            v_max: self.v_max,
            num_uavs: self.num_uavs,
        }
    }

    /// Length of the encoded observation vector.
    pub fn observation_dim(&self) -> usize {
        observation_dim(self.num_sensors)
    }
}

pub fn observation_dim(num_sensors: usize) -> usize {
    2 + num_sensors + 5 + num_sensors
}

/// Scales used to bring features to order one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationNorms {
    pub bounds: Bounds,
    pub aoi_scale: f64,
    pub v_max: f64,
    pub num_uavs: usize,
}

impl ObservationNorms {
    fn position(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            (p.x - self.bounds.min.x) / self.bounds.width(),
            (p.y - self.bounds.min.y) / self.bounds.height(),
        )
    }
}

/// What one agent sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Own position mapped into `[0, 1]²`.
    pub own_pos: Vec2,
    /// Sensor AoIs divided by the AoI scale.
    pub sensor_aoi: Vec<f64>,
    pub mean_field: MeanFieldObservation,
    /// Flat feature vector fed to the networks.
    pub features: Vec<f64>,
}

/// Encodes `[own_pos(2) | sensor_aoi(J) | mf_pos(2) | mf_vel(2) | mf_schedule(J) | mf_count(1)]`.
///
/// The mean-field block is all zeros when the agent has no neighbors.
pub fn encode_observation(world: &WorldState, agent: usize, mf: &MeanFieldObservation, norms: &ObservationNorms) -> Vec<f64> {
    let j = world.sensors.len();
    let mut out = Vec::with_capacity(observation_dim(j));
    let own = norms.position(world.uavs[agent].position);
    out.extend([own.x, own.y]);
    out.extend(world.sensors.iter().map(|s| s.aoi / norms.aoi_scale));
    if mf.neighbor_count == 0 {
        out.extend(std::iter::repeat_n(0.0, 5 + j));
    } else {
        let p = norms.position(mf.mean_neighbor_pos);
        out.extend([p.x, p.y]);
        out.extend([mf.mean_neighbor_vel.x / norms.v_max, mf.mean_neighbor_vel.y / norms.v_max]);
        out.extend(mf.mean_schedule.iter().copied());
        out.push(mf.neighbor_count as f64 / (norms.num_uavs.max(2) - 1) as f64);
    }
    out
}

/// The environment for one scenario: configuration plus a fixed sensor layout.
#[derive(Debug, Clone)]
pub struct Env {
    pub config: EnvConfig,
    pub sensor_positions: Vec<Vec2>,
}

/// Outcome of one joint step.
#[derive(Debug, Clone)]
pub struct Step {
    pub world: WorldState,
    pub observations: Vec<Observation>,
    /// Average AoI after the step, seconds.
    pub cost: f64,
    /// Sensors refreshed in this step, ascending and deduplicated.
    pub served: Vec<usize>,
}

impl Env {
    /// Builds the scenario for `seed`: the sensor layout is drawn from the
    /// configured distribution and stays fixed for the environment's lifetime.
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sensor_positions =
            sample_sensor_positions(config.sensor_distribution, config.num_sensors, &config.bounds(), &mut rng);
        Ok(Env {
            config,
            sensor_positions,
        })
    }

    /// Starts an episode: UAVs uniformly placed and hovering, every AoI at `dt`.
    /// The world's noise generator is seeded from `rng`.
    pub fn reset_with<R: Rng + ?Sized>(&self, rng: &mut R) -> (WorldState, Vec<Observation>) {
        let c = &self.config;
        let bounds = c.bounds();
        let uavs = (0..c.num_uavs)
            .map(|id| UavState {
                id,
                position: uniform_point(&bounds, rng),
                altitude: c.altitude,
                velocity: Vec2::ZERO,
            })
            .collect();
        let sensors = self
            .sensor_positions
            .iter()
            .enumerate()
            .map(|(id, &position)| SensorState {
                id,
                position,
                aoi: c.dt,
            })
            .collect();
        let world = WorldState {
            step_index: 0,
            uavs,
            sensors,
            rng: ChaCha8Rng::seed_from_u64(rng.random()),
            dt: c.dt,
            sigma: c.sigma,
            bounds,
        };
        let none = vec![None; c.num_uavs];
        let observations = self.observe(&world, &none);
        (world, observations)
    }

    pub fn observe(&self, world: &WorldState, last_actions: &[Option<HybridAction>]) -> Vec<Observation> {
        let norms = self.config.norms();
        (0..world.uavs.len())
            .map(|k| {
                let mf = neighbor_mean_field(k, world, last_actions, self.config.neighborhood())
                    .expect("agent index in range and actions validated");
                let features = encode_observation(world, k, &mf, &norms);
                let own = norms.position(world.uavs[k].position);
                Observation {
                    own_pos: own,
                    sensor_aoi: features[2..2 + world.sensors.len()].to_vec(),
                    mean_field: mf,
                    features,
                }
            })
            .collect()
    }

    /// Advances the world by one step under `actions` (one per UAV).
    pub fn step(&self, world: &WorldState, actions: &[HybridAction]) -> Result<Step> {
        let c = &self.config;
        if actions.len() != world.uavs.len() {
            return Err(Error::Contract(format!(
                "expected {} actions, got {}",
                world.uavs.len(),
                actions.len()
            )));
        }
        for a in actions {
            a.validate(world.sensors.len())?;
        }
        let mut next = world.clone();
        for (uav, action) in next.uavs.iter_mut().zip(actions) {
            let noise = Vec2::new(StandardNormal.sample(&mut next.rng), StandardNormal.sample(&mut next.rng));
            let v_cmd = action.velocity_command(c.v_min, c.v_max);
            *uav = step_kinematics(uav, v_cmd, next.dt, next.sigma, noise, &next.bounds);
        }
        let schedules: Vec<usize> = actions.iter().map(|a| a.sensor_index).collect();
        let served = self.collect_and_age(&mut next, &schedules)?;
        let cost = average_aoi(&next)?;
        let last: Vec<Option<HybridAction>> = actions.iter().copied().map(Some).collect();
        let observations = self.observe(&next, &last);
        Ok(Step {
            world: next,
            observations,
            cost,
            served,
        })
    }

    /// Beacon/upload/acknowledge round for UAVs already at their new
    /// positions, followed by AoI aging. Returns the refreshed sensors.
    pub fn collect_and_age(&self, world: &mut WorldState, schedules: &[usize]) -> Result<Vec<usize>> {
        let mut served = Vec::with_capacity(schedules.len());
        for (uav, &j) in world.uavs.iter().zip(schedules) {
            let sensor = world
                .sensors
                .get(j)
                .ok_or_else(|| Error::Contract(format!("unknown sensor {j}")))?;
            let loss = channel::path_loss(uav.position, uav.altitude, sensor.position, &self.config.channel);
            if channel::transmission_outcome(loss, &self.config.channel) == TransmissionOutcome::Success {
                served.push(j);
            }
        }
        served.sort_unstable();
        served.dedup();
        world.sensors = world::advance_aoi(&world.sensors, &served, world.dt)?;
        world.step_index += 1;
        Ok(served)
    }
}

/// Builds the scenario for `seed` and starts an episode from the same seed.
pub fn reset(config: &EnvConfig, seed: u64) -> Result<(Env, WorldState, Vec<Observation>)> {
    let env = Env::new(config.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_a0e1);
    let (world, obs) = env.reset_with(&mut rng);
    Ok((env, world, obs))
}

/// One joint step; see [`Env::step`].
pub fn env_step(env: &Env, world: &WorldState, actions: &[HybridAction]) -> Result<Step> {
    env.step(world, actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TransmissionMode;
    use proptest::prelude::*;

    fn small(num_uavs: usize, num_sensors: usize) -> EnvConfig {
        EnvConfig {
            num_uavs,
            num_sensors,
            area_width: 200.0,
            area_height: 200.0,
            sigma: 0.0,
            ..EnvConfig::default()
        }
    }

    fn act(sensor_index: usize) -> HybridAction {
        HybridAction {
            sensor_index,
            waypoint_offset: Vec2::new(1.0, 0.0),
            speed: 5.0,
        }
    }

    fn set_aois(world: &mut WorldState, aois: &[f64]) {
        for (s, &a) in world.sensors.iter_mut().zip(aois) {
            s.aoi = a;
        }
    }

    #[test]
    fn reset_is_deterministic_and_in_bounds() {
        let cfg = small(5, 12);
        let (_, w1, o1) = reset(&cfg, 7).unwrap();
        let (_, w2, o2) = reset(&cfg, 7).unwrap();
        assert_eq!(w1.uavs, w2.uavs);
        assert_eq!(w1.sensors, w2.sensors);
        assert_eq!(o1, o2);
        let b = cfg.bounds();
        assert!(w1.uavs.iter().all(|u| b.contains(u.position)));
        assert!(w1.sensors.iter().all(|s| b.contains(s.position) && s.aoi == cfg.dt));
        assert_eq!(w1.time(), 0.0);
    }

    #[test]
    fn reset_rejects_empty_populations() {
        assert!(matches!(reset(&small(0, 3), 1), Err(Error::Config(_))));
        assert!(matches!(reset(&small(3, 0), 1), Err(Error::Config(_))));
    }

    #[test]
    fn single_agent_observation_shape() {
        let (_, _, obs) = reset(&small(1, 1), 2).unwrap();
        assert_eq!(obs[0].features.len(), 2 + 1 + 5 + 1);
        assert!(obs[0].features[3..].iter().all(|&f| f == 0.0));
        assert_eq!(obs[0].mean_field.neighbor_count, 0);
    }

    #[test]
    fn hand_traced_step() {
        let (env, mut w, _) = reset(&small(1, 2), 3).unwrap();
        set_aois(&mut w, &[3.0, 5.0]);
        let step = env.step(&w, &[act(0)]).unwrap();
        assert_eq!(step.world.aois(), vec![1.0, 6.0]);
        assert_eq!(step.cost, 3.5);
        assert_eq!(step.world.step_index, 1);
        assert_eq!(step.world.time(), 1.0);
        let moved = step.world.uavs[0].position - w.uavs[0].position;
        let expected = w.uavs[0].position + Vec2::new(5.0, 0.0);
        if w.bounds.contains(expected) {
            assert!((moved - Vec2::new(5.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn unreachable_threshold_ages_everything() {
        let mut cfg = small(3, 4);
        cfg.channel.mode = TransmissionMode::Threshold;
        cfg.channel.loss_threshold = 10.0;
        let (env, w, _) = reset(&cfg, 4).unwrap();
        let step = env.step(&w, &[act(0), act(1), act(2)]).unwrap();
        assert!(step.served.is_empty());
        assert!(step.world.sensors.iter().all(|s| s.aoi == 2.0 * cfg.dt));
    }

    #[test]
    fn duplicate_schedules_reset_once() {
        let (env, mut w, _) = reset(&small(2, 3), 5).unwrap();
        set_aois(&mut w, &[4.0, 2.0, 7.0]);
        let both = env.step(&w, &[act(2), act(2)]).unwrap();
        let (env1, mut w1, _) = reset(&small(1, 3), 5).unwrap();
        set_aois(&mut w1, &[4.0, 2.0, 7.0]);
        let one = env1.step(&w1, &[act(2)]).unwrap();
        assert_eq!(both.served, vec![2]);
        assert_eq!(both.cost, one.cost);
    }

    #[test]
    fn malformed_actions_are_rejected() {
        let (env, w, _) = reset(&small(2, 3), 6).unwrap();
        assert!(matches!(env.step(&w, &[act(0)]), Err(Error::Contract(_))));
        assert!(matches!(env.step(&w, &[act(0), act(3)]), Err(Error::Contract(_))));
        let mut bad = act(0);
        bad.speed = f64::NAN;
        assert!(matches!(env.step(&w, &[act(0), bad]), Err(Error::Contract(_))));
    }

    #[test]
    fn observation_layout_and_normalization() {
        let cfg = small(3, 4);
        let (env, mut w, _) = reset(&cfg, 8).unwrap();
        w.uavs[0].position = Vec2::new(0.0, 0.0);
        w.uavs[1].position = Vec2::new(200.0, 200.0);
        let obs = env.observe(&w, &[None, None, None]);
        assert_eq!(obs[0].features.len(), 2 + 4 + 5 + 4);
        assert_eq!(&obs[0].features[..2], &[0.0, 0.0]);
        assert_eq!(&obs[1].features[..2], &[1.0, 1.0]);
        assert_eq!(obs[0].features[2], cfg.dt / 40.0);
    }

    #[test]
    fn permuting_other_agents_only_touches_mean_field_block() {
        let cfg = small(4, 3);
        let (env, mut w, _) = reset(&cfg, 9).unwrap();
        for (k, u) in w.uavs.iter_mut().enumerate() {
            u.velocity = Vec2::new(k as f64, 1.0);
        }
        let acts = [Some(act(0)), Some(act(1)), Some(act(2)), Some(act(1))];
        let a = env.observe(&w, &acts);
        let mut w2 = w.clone();
        w2.uavs.swap(1, 2);
        let mut acts2 = acts;
        acts2.swap(1, 2);
        let b = env.observe(&w2, &acts2);
        let own = 2 + 3;
        assert_eq!(a[0].features[..own], b[0].features[..own]);
        for (x, y) in a[0].features[own..].iter().zip(&b[0].features[own..]) {
            assert!((x - y).abs() < 1e-12);
        }
        // with a fixed neighbor set, changing a neighbor's state moves only the mf block
        let mut w3 = w.clone();
        w3.uavs[2].position = Vec2::new(1.0, 2.0);
        let c = env.observe(&w3, &acts);
        assert_eq!(a[0].features[..own], c[0].features[..own]);
        assert_ne!(a[0].features[own..], c[0].features[own..]);
    }

    #[test]
    fn idle_costs_are_affine() {
        let mut cfg = small(2, 5);
        cfg.channel.mode = TransmissionMode::Threshold;
        cfg.channel.loss_threshold = -1.0;
        let (env, mut w, _) = reset(&cfg, 10).unwrap();
        let mut prev = average_aoi(&w).unwrap();
        for _ in 0..20 {
            let s = env.step(&w, &[act(0), act(1)]).unwrap();
            assert!((s.cost - (prev + cfg.dt)).abs() < 1e-12);
            prev = s.cost;
            w = s.world;
        }
    }

    #[test]
    fn step_is_deterministic_given_world() {
        let mut cfg = small(3, 4);
        cfg.sigma = 2.0;
        let (env, w, _) = reset(&cfg, 11).unwrap();
        let acts = [act(0), act(1), act(3)];
        let a = env.step(&w, &acts).unwrap();
        let b = env.step(&w, &acts).unwrap();
        assert_eq!(a.world.uavs, b.world.uavs);
        assert_eq!(a.cost, b.cost);
    }

    proptest! {
        #[test]
        fn serving_max_aoi_is_never_worse(aois in prop::collection::vec(1.0..30.0f64, 2..10), other in 0usize..10) {
            let cfg = small(1, aois.len());
            let (env, mut w, _) = reset(&cfg, 12).unwrap();
            set_aois(&mut w, &aois);
            let argmax = (0..aois.len()).fold(0, |b, k| if aois[k] > aois[b] { k } else { b });
            let best = env.step(&w, &[act(argmax)]).unwrap().cost;
            let alt = env.step(&w, &[act(other % aois.len())]).unwrap().cost;
            prop_assert!(best <= alt + 1e-12);
        }

        #[test]
        fn commanded_speed_respects_limits(ox in -15.0..15.0f64, oy in -15.0..15.0f64, speed in -10.0..40.0f64) {
            let a = HybridAction { sensor_index: 0, waypoint_offset: Vec2::new(ox, oy), speed };
            let v = a.velocity_command(0.0, 15.0);
            prop_assert!(v.norm() <= 15.0 + 1e-12);
        }
    }
}
