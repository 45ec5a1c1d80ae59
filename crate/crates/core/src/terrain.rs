//! Parametric ground-truth terrain models.
//!
//! A terrain is described by closed-form steady-state responses in both
//! frames: what each wheel actually reaches for a commanded speed, and what
//! body velocity the platform actually realizes for a commanded twist. The
//! simulator relaxes toward these fixed points with a first-order powertrain
//! lag; the analysis stack then has an exact oracle to be validated against.

use thiserror::Error;

use crate::model::{idd_forward, BodyVelocity, RobotGeometry, WheelCommand};

/// Steady-state slip description of one robot-terrain pairing.
///
/// Wheel authority is proportional per side plus a torque-proxy loss that
/// grows with the commanded left/right speed difference. Body losses combine
/// a proportional part, a part growing with the normalized yaw command, a
/// low-speed backlash bump, and saturating reachability caps. Lateral speed
/// appears as drift proportional to the forward-times-yaw product.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainModel {
    pub name: String,
    /// Powertrain first-order lag time constant, s.
    pub tau: f64,
    /// Measurement noise standard deviation applied per reported channel.
    pub noise_std: f64,

    /// Fraction of the commanded speed each wheel can hold (1 = perfect).
    pub wheel_gain_left: f64,
    pub wheel_gain_right: f64,
    /// Wheel-frame loss per rad/s of |wr - wl|, the torque demand proxy.
    pub wheel_diff_gain: f64,
    /// Softening scale for the direction of the torque-proxy loss, rad/s.
    pub wheel_ref_speed: f64,

    /// Proportional longitudinal loss.
    pub body_vx_gain: f64,
    /// Reachable longitudinal speed cap, m/s (infinite = uncapped).
    pub body_vx_reach: f64,
    /// Proportional yaw loss at zero command.
    pub body_wz_gain: f64,
    /// Additional yaw loss per unit of |wz| / body_wz_norm.
    pub body_wz_slope: f64,
    /// Normalization for the slope term, rad/s.
    pub body_wz_norm: f64,
    /// Extra yaw loss near zero command (suspension wind-up).
    pub body_wz_backlash: f64,
    /// Width of the backlash bump, rad/s.
    pub body_backlash_scale: f64,
    /// Reachable yaw rate cap, rad/s (infinite = uncapped).
    pub body_wz_reach: f64,
    /// Lateral drift per unit of (vx * wz) / body_drift_norm.
    pub body_drift_gain: f64,
    pub body_drift_norm: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum TerrainError {
    #[error("unknown terrain preset `{0}`")]
    UnknownPreset(String),
    #[error("terrain field `{0}` out of range: {1}")]
    FieldRange(&'static str, f64),
}

/// Saturating reachability: identity for an infinite cap.
fn reach(x: f64, cap: f64) -> f64 {
    if cap.is_infinite() {
        x
    } else {
        cap * (x / cap).tanh()
    }
}

fn softabs(x: f64) -> f64 {
    (x * x + 0.25).sqrt()
}

impl TerrainModel {
    /// Zero-slip terrain with a short powertrain lag.
    pub fn perfect() -> Self {
        TerrainModel {
            name: "perfect".into(),
            tau: 0.15,
            noise_std: 0.0,
            wheel_gain_left: 1.0,
            wheel_gain_right: 1.0,
            wheel_diff_gain: 0.0,
            wheel_ref_speed: 1.0,
            body_vx_gain: 0.0,
            body_vx_reach: f64::INFINITY,
            body_wz_gain: 0.0,
            body_wz_slope: 0.0,
            body_wz_norm: 1.0,
            body_wz_backlash: 0.0,
            body_backlash_scale: 1.0,
            body_wz_reach: f64::INFINITY,
            body_drift_gain: 0.0,
            body_drift_norm: 1.0,
        }
    }

    /// Build a named preset for a specific platform.
    ///
    /// Losses that originate in the tire-ground coupling scale with the
    /// platform: light platforms lose proportionally more of their yaw
    /// command than heavy ones, so the same ground produces different
    /// transfer functions per robot. Constants are frozen against the
    /// integration-test targets.
    pub fn preset(name: &str, geom: &RobotGeometry) -> Result<Self, TerrainError> {
        let wz_norm = geom.max_angular_speed;
        let drift_norm = geom.max_angular_speed;
        // Yaw authority scale: ~1.05 for a 75 kg class platform, ~0.6 for a
        // half-tonne one.
        let turn_loss = 0.58 + 0.95 * (-geom.mass / 110.0).exp();
        let mut t = TerrainModel::perfect();
        t.name = name.to_string();
        t.noise_std = 0.05;
        t.body_wz_norm = wz_norm;
        t.body_drift_norm = drift_norm;
        t.body_backlash_scale = 0.2 * wz_norm;
        t.wheel_ref_speed = 0.3 * geom.max_wheel_speed;
        match name {
            "perfect" => {
                t.noise_std = 0.0;
            }
            "asphalt" => {
                t.tau = 0.2;
                t.wheel_gain_left = 0.94;
                t.body_vx_gain = 0.04;
                t.body_wz_gain = 0.30 * turn_loss;
                t.body_wz_slope = 0.42 * turn_loss;
                t.body_wz_backlash = 0.17 * turn_loss;
                t.body_drift_gain = 0.40;
            }
            "grass" => {
                t.tau = 0.22;
                t.body_vx_gain = 0.06;
                t.body_wz_gain = 0.32 * turn_loss;
                t.body_wz_slope = 0.42 * turn_loss;
                t.body_wz_backlash = 0.17 * turn_loss;
                t.body_drift_gain = 0.45;
            }
            "gravel" => {
                t.tau = 0.22;
                t.body_vx_gain = 0.07;
                t.body_wz_gain = 0.33 * turn_loss;
                t.body_wz_slope = 0.43 * turn_loss;
                t.body_wz_backlash = 0.17 * turn_loss;
                t.body_drift_gain = 0.50;
            }
            "sand" => {
                t.tau = 0.3;
                t.wheel_diff_gain = 0.02;
                t.body_vx_gain = 0.10;
                t.body_vx_reach = 0.85 * geom.max_linear_speed;
                t.body_wz_gain = 0.38 * turn_loss;
                t.body_wz_slope = 0.48 * turn_loss;
                t.body_wz_backlash = 0.18 * turn_loss;
                t.body_drift_gain = 0.65;
            }
            "mud" => {
                t.tau = 0.3;
                t.wheel_diff_gain = 0.05;
                t.body_vx_gain = 0.12;
                t.body_vx_reach = 0.9 * geom.max_linear_speed;
                t.body_wz_gain = 0.36 * turn_loss;
                t.body_wz_slope = 0.44 * turn_loss;
                t.body_wz_backlash = 0.18 * turn_loss;
                t.body_drift_gain = 0.55;
            }
            "ice" => {
                t.tau = 0.4;
                t.body_vx_gain = 0.05;
                t.body_vx_reach = 0.5 * geom.max_linear_speed;
                t.body_wz_gain = 0.52 * turn_loss;
                t.body_wz_slope = 0.55 * turn_loss;
                t.body_wz_backlash = 0.20 * turn_loss;
                t.body_wz_reach = 0.8 * geom.max_angular_speed;
                t.body_drift_gain = 1.20;
            }
            other => return Err(TerrainError::UnknownPreset(other.to_string())),
        }
        Ok(t)
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["perfect", "asphalt", "grass", "gravel", "sand", "mud", "ice"]
    }

    pub fn validate(&self) -> Result<(), TerrainError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(TerrainError::FieldRange("tau", self.tau));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(TerrainError::FieldRange("noise_std", self.noise_std));
        }
        for (name, v) in [
            ("wheel_gain_left", self.wheel_gain_left),
            ("wheel_gain_right", self.wheel_gain_right),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(TerrainError::FieldRange(name, v));
            }
        }
        Ok(())
    }

    /// Fractional yaw loss at a commanded yaw rate.
    fn yaw_loss(&self, wz: f64) -> f64 {
        let bump = (-(wz / self.body_backlash_scale).powi(2)).exp();
        let kappa = self.body_wz_gain
            + self.body_wz_slope * wz.abs() / self.body_wz_norm
            + self.body_wz_backlash * bump;
        kappa.min(0.95)
    }

    /// Steady-state wheel speeds actually held for a wheel command.
    pub fn wheel_steady(&self, cmd: WheelCommand) -> WheelCommand {
        let diff = cmd.right - cmd.left;
        let loss = |w: f64, gain: f64| {
            gain * w - self.wheel_diff_gain * softabs(diff) * (w / self.wheel_ref_speed).tanh()
        };
        WheelCommand {
            left: loss(cmd.left, self.wheel_gain_left),
            right: loss(cmd.right, self.wheel_gain_right),
        }
    }

    /// Steady-state body velocity actually realized for a commanded twist.
    pub fn body_steady(&self, cmd: BodyVelocity) -> BodyVelocity {
        let vx = (1.0 - self.body_vx_gain) * reach(cmd.vx, self.body_vx_reach);
        let wz = (1.0 - self.yaw_loss(cmd.wz)) * reach(cmd.wz, self.body_wz_reach);
        let vy = -self.body_drift_gain * vx * wz / self.body_drift_norm;
        BodyVelocity { vx, vy, wz }
    }
}

/// The exact fixed point the simulator's lag converges to: realized wheel
/// speeds and realized body velocity for a held command. This is the
/// ground-truth oracle the analysis stack is validated against.
pub fn steady_state_velocity(
    geom: &RobotGeometry,
    terrain: &TerrainModel,
    cmd: WheelCommand,
) -> (WheelCommand, BodyVelocity) {
    let wheels = terrain.wheel_steady(cmd);
    let body = terrain.body_steady(idd_forward(geom, cmd));
    (wheels, body)
}
