//! Air-to-ground channel: line-of-sight probability, elevation angle,
//! path loss and the rule deciding whether a scheduled upload succeeds.

use serde::{Deserialize, Serialize};

use crate::world::Vec2;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransmissionMode {
    /// Radios cover the whole field; every scheduled upload succeeds.
    AlwaysSucceed,
    /// Uploads succeed only when the path loss is at most `loss_threshold`.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Environment constant `a` of the LoS curve (> 0).
    pub a: f64,
    /// Environment constant `b` of the LoS curve (≥ 0).
    pub b: f64,
    /// Excess loss under line of sight, dB.
    pub eta_los: f64,
    /// Excess loss without line of sight, dB (≥ `eta_los`).
    pub eta_nlos: f64,
    pub carrier_freq: f64,
    pub light_speed: f64,
    /// Nominal radio coverage radius, m. Informational: the per-link loss
    /// uses the slant range instead.
    pub coverage_radius: f64,
    pub loss_threshold: f64,
    pub mode: TransmissionMode,
}

impl Default for ChannelParams {
    /// Typical urban constants with a 2 GHz carrier.
    fn default() -> Self {
        ChannelParams {
            a: 9.61,
            b: 0.16,
            eta_los: 1.0,
            eta_nlos: 20.0,
            carrier_freq: 2.0e9,
            light_speed: SPEED_OF_LIGHT,
            coverage_radius: 500.0,
            loss_threshold: 100.0,
            mode: TransmissionMode::AlwaysSucceed,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.a > 0.0) {
            return Err(format!("channel.a must be > 0, got {}", self.a));
        }
        if !(self.b >= 0.0) {
            return Err(format!("channel.b must be >= 0, got {}", self.b));
        }
        if !(self.eta_nlos >= self.eta_los) {
            return Err("channel.eta_nlos must be >= channel.eta_los".into());
        }
        if !(self.carrier_freq > 0.0) || !(self.light_speed > 0.0) {
            return Err("channel carrier_freq and light_speed must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmissionOutcome {
    Success,
    Retry,
}

/// Elevation angle in radians of a UAV at `altitude` above `uav_xy`, seen
/// from a ground sensor at `sensor_xy`. Directly overhead gives π/2.
pub fn elevation_angle(uav_xy: Vec2, altitude: f64, sensor_xy: Vec2) -> f64 {
    let d = uav_xy.distance(sensor_xy);
    if d == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    (altitude / d).atan()
}

/// Line-of-sight probability for an elevation angle given in degrees.
pub fn los_probability(phi_deg: f64, params: &ChannelParams) -> f64 {
    1.0 / (1.0 + params.a * (-params.b * (phi_deg - params.a)).exp())
}

/// Mean path loss in dB between a UAV and a ground sensor.
///
/// The distance term uses the slant range `√(d² + h²)` of the link.
pub fn path_loss(uav_xy: Vec2, altitude: f64, sensor_xy: Vec2, params: &ChannelParams) -> f64 {
    let d = uav_xy.distance(sensor_xy);
    let phi_deg = elevation_angle(uav_xy, altitude, sensor_xy).to_degrees();
    let slant = if d == 0.0 { altitude } else { d.hypot(altitude) };
    let p_los = los_probability(phi_deg, params);
    p_los * (params.eta_los - params.eta_nlos)
        + 20.0 * slant.log10()
        + 20.0 * params.carrier_freq.log10()
        + 20.0 * (4.0 * std::f64::consts::PI / params.light_speed).log10()
        + params.eta_nlos
}

pub fn transmission_outcome(loss_db: f64, params: &ChannelParams) -> TransmissionOutcome {
    match params.mode {
        TransmissionMode::AlwaysSucceed => TransmissionOutcome::Success,
        TransmissionMode::Threshold if loss_db <= params.loss_threshold => TransmissionOutcome::Success,
        TransmissionMode::Threshold => TransmissionOutcome::Retry,
    }
}
