//! Deterministic robot-terrain simulator.
//!
//! The wheel speeds and a residual body slip each follow a first-order lag
//! toward the terrain model's steady state for the currently effective
//! command; the pose integrates the resulting body velocity with a midpoint
//! heading update. Exponential discretization keeps the lag exact at any
//! step size, so the simulated fixed point equals `steady_state_velocity`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::command_space::clamp_transition;
use crate::model::{idd_forward, idd_inverse, BodyVelocity, RobotGeometry, WheelCommand};
use crate::terrain::{steady_state_velocity, TerrainModel};

/// Fixed control and logging rate.
pub const SAMPLE_RATE_HZ: f64 = 20.0;
/// Step duration at the fixed rate, s.
pub const STEP_SECONDS: f64 = 1.0 / SAMPLE_RATE_HZ;

/// Yaw tolerance at which a reorientation is considered done, rad.
const REORIENT_TOLERANCE: f64 = 0.05;
/// Hard cap on a single reorientation, s.
const REORIENT_TIMEOUT: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

/// True (noise-free) simulator state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub pose: Pose,
    pub body_velocity: BodyVelocity,
    pub wheel_speeds: WheelCommand,
    pub clock: f64,
}

impl SimState {
    pub fn at_rest() -> Self {
        SimState {
            pose: Pose::default(),
            body_velocity: BodyVelocity::default(),
            wheel_speeds: WheelCommand::default(),
            clock: 0.0,
        }
    }
}

/// Operator-enforced rectangular perimeter centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeZone {
    pub half_width: f64,
    pub half_height: f64,
}

impl SafeZone {
    /// Zone from full side lengths, e.g. a 20 x 45 m field.
    pub fn from_dimensions(width: f64, height: f64) -> Self {
        SafeZone {
            half_width: width / 2.0,
            half_height: height / 2.0,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.half_width && y.abs() <= self.half_height
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Terrain(#[from] crate::terrain::TerrainError),
    #[error("safe zone {0} x {1} m is too small: needs one dimension >= {2} m")]
    ZoneTooSmall(f64, f64, f64),
    #[error("step size {0} outside (0, 0.1]")]
    BadStepSize(f64),
}

/// Longest distance coverable in one held command, with margin: the zone
/// must fit 1.5x the distance of a full-speed six-second hold in at least
/// one dimension.
pub fn minimum_zone_dimension(geom: &RobotGeometry) -> f64 {
    1.5 * geom.max_linear_speed * 6.0
}

pub fn minimum_area_check(geom: &RobotGeometry, zone: &SafeZone) -> bool {
    let largest = (2.0 * zone.half_width).max(2.0 * zone.half_height);
    largest >= minimum_zone_dimension(geom)
}

/// Interrupt decision: extrapolate the current velocity in the global frame
/// over `horizon` seconds and interrupt iff that ray leaves the zone.
pub fn operator_check(state: &SimState, zone: &SafeZone, horizon: f64) -> bool {
    debug_assert!(horizon > 0.0);
    let (sin, cos) = state.pose.yaw.sin_cos();
    let v = state.body_velocity;
    let vx_g = v.vx * cos - v.vy * sin;
    let vy_g = v.vx * sin + v.vy * cos;
    !zone.contains(state.pose.x + vx_g * horizon, state.pose.y + vy_g * horizon)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(2.0 * std::f64::consts::PI);
    if a > std::f64::consts::PI {
        a -= 2.0 * std::f64::consts::PI;
    }
    a
}

/// One noisy measurement of the simulator state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub t: f64,
    pub wheel_speeds: WheelCommand,
    pub body_velocity: BodyVelocity,
    pub pose: Pose,
}

/// Simulator owning the vehicle state, the acceleration-limited effective
/// command, and the measurement noise stream. One instance per run.
pub struct Simulator {
    geom: RobotGeometry,
    terrain: TerrainModel,
    dt: f64,
    state: SimState,
    slip_residual: BodyVelocity,
    effective_cmd: BodyVelocity,
    steps: u64,
    noise: ChaCha8Rng,
    normal: Normal<f64>,
}

impl Simulator {
    pub fn new(geom: &RobotGeometry, terrain: &TerrainModel, noise_seed: u64) -> Result<Self, SimError> {
        terrain.validate()?;
        let normal = Normal::new(0.0, terrain.noise_std.max(f64::MIN_POSITIVE))
            .expect("validated noise std");
        Ok(Simulator {
            geom: geom.clone(),
            terrain: terrain.clone(),
            dt: STEP_SECONDS,
            state: SimState::at_rest(),
            slip_residual: BodyVelocity::default(),
            effective_cmd: BodyVelocity::default(),
            steps: 0,
            noise: ChaCha8Rng::seed_from_u64(noise_seed),
            normal,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn geometry(&self) -> &RobotGeometry {
        &self.geom
    }

    pub fn terrain(&self) -> &TerrainModel {
        &self.terrain
    }

    /// Command currently at the motors, after the acceleration ramp.
    pub fn effective_command(&self) -> BodyVelocity {
        self.effective_cmd
    }

    pub fn clock(&self) -> f64 {
        self.state.clock
    }

    /// Advance one step toward `target`, ramping the longitudinal channel.
    pub fn step(&mut self, target: BodyVelocity) {
        self.step_dt(target, self.dt).expect("fixed dt is valid");
    }

    /// Advance one step of `dt` seconds toward `target`.
    pub fn step_dt(&mut self, target: BodyVelocity, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0 && dt <= 0.1) {
            return Err(SimError::BadStepSize(dt));
        }
        self.effective_cmd = clamp_transition(&self.geom, self.effective_cmd, target, dt);
        let wheel_cmd =
            idd_inverse(&self.geom, self.effective_cmd).expect("commands have zero lateral speed");
        let (wheel_ss, body_ss) = steady_state_velocity(&self.geom, &self.terrain, wheel_cmd);
        let ideal_ss = idd_forward(&self.geom, wheel_ss);
        let residual_ss = BodyVelocity::new(
            ideal_ss.vx - body_ss.vx,
            ideal_ss.vy - body_ss.vy,
            ideal_ss.wz - body_ss.wz,
        );

        // Exact first-order relaxation toward the fixed point.
        let a = (-dt / self.terrain.tau).exp();
        let lag = |cur: f64, ss: f64| ss + (cur - ss) * a;
        self.state.wheel_speeds = WheelCommand::new(
            lag(self.state.wheel_speeds.left, wheel_ss.left),
            lag(self.state.wheel_speeds.right, wheel_ss.right),
        );
        self.slip_residual = BodyVelocity::new(
            lag(self.slip_residual.vx, residual_ss.vx),
            lag(self.slip_residual.vy, residual_ss.vy),
            lag(self.slip_residual.wz, residual_ss.wz),
        );
        let ideal = idd_forward(&self.geom, self.state.wheel_speeds);
        let v = BodyVelocity::new(
            ideal.vx - self.slip_residual.vx,
            ideal.vy - self.slip_residual.vy,
            ideal.wz - self.slip_residual.wz,
        );
        self.state.body_velocity = v;

        // Midpoint pose update in the global frame.
        let yaw_mid = self.state.pose.yaw + v.wz * dt / 2.0;
        let (sin, cos) = yaw_mid.sin_cos();
        self.state.pose.x += (v.vx * cos - v.vy * sin) * dt;
        self.state.pose.y += (v.vx * sin + v.vy * cos) * dt;
        self.state.pose.yaw = wrap_angle(self.state.pose.yaw + v.wz * dt);
        self.steps += 1;
        self.state.clock = self.steps as f64 * dt;
        Ok(())
    }

    /// Noisy measurement of the current state. Noise applies to reported
    /// velocities only; the pose is assumed to come from a good localizer.
    pub fn measure(&mut self) -> Measurement {
        let mut noisy = |v: f64| {
            if self.terrain.noise_std == 0.0 {
                v
            } else {
                v + self.normal.sample(&mut self.noise)
            }
        };
        Measurement {
            t: self.state.clock,
            wheel_speeds: WheelCommand::new(
                noisy(self.state.wheel_speeds.left),
                noisy(self.state.wheel_speeds.right),
            ),
            body_velocity: BodyVelocity::new(
                noisy(self.state.body_velocity.vx),
                noisy(self.state.body_velocity.vy),
                noisy(self.state.body_velocity.wz),
            ),
            pose: self.state.pose,
        }
    }

    /// Turn in place until the heading suits resuming `pending` from here:
    /// facing the zone center for forward commands, facing away for reverse
    /// ones. Returns the number of steps spent, all of which count as idle.
    pub fn reorient(&mut self, pending: BodyVelocity) -> u64 {
        let turn_rate = self.geom.max_angular_speed / 2.0;
        let max_steps = (REORIENT_TIMEOUT / self.dt) as u64;
        let mut spent = 0;
        while spent < max_steps {
            let to_center = (-self.state.pose.y).atan2(-self.state.pose.x);
            let desired = if pending.vx < -1e-9 {
                wrap_angle(to_center + std::f64::consts::PI)
            } else {
                to_center
            };
            let err = wrap_angle(desired - self.state.pose.yaw);
            if err.abs() < REORIENT_TOLERANCE {
                break;
            }
            let cmd = BodyVelocity::command(0.0, turn_rate.copysign(err));
            self.step(cmd);
            spent += 1;
        }
        spent
    }
}
