//! Robot geometry and the ideal differential-drive (IDD) kinematic map.
//!
//! A skid-steer platform is driven by two wheel-speed commands, one per
//! side. Under the no-slip assumption those map linearly to a body-frame
//! twist. Both directions of that map live here, together with the box
//! approximation of the rigid-body inertia used by the energy metric.

use thiserror::Error;

/// Physical description of a skid-steer platform plus its velocity and
/// acceleration limits.
///
/// Lengths are metres, masses kilograms, wheel speeds rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotGeometry {
    /// Total vehicle mass, kg.
    pub mass: f64,
    /// Lateral distance between the left and right wheel contact lines, m.
    pub base_width: f64,
    /// Wheel radius, m.
    pub wheel_radius: f64,
    /// Body length along the driving direction, m.
    pub body_depth: f64,
    /// Body height, m.
    pub body_height: f64,
    /// Motor controller wheel speed limit, rad/s (symmetric).
    pub max_wheel_speed: f64,
    /// Manufacturer body-frame longitudinal speed limit, m/s.
    pub max_linear_speed: f64,
    /// Manufacturer body-frame yaw rate limit, rad/s.
    pub max_angular_speed: f64,
    /// User-defined longitudinal acceleration limit, m/s^2. Binds the
    /// distance between consecutive commands, not the command space itself.
    pub max_linear_accel: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("geometry field `{0}` must be strictly positive and finite, got {1}")]
    NonPositive(&'static str, f64),
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields = [
            ("mass", self.mass),
            ("base_width", self.base_width),
            ("wheel_radius", self.wheel_radius),
            ("body_depth", self.body_depth),
            ("body_height", self.body_height),
            ("max_wheel_speed", self.max_wheel_speed),
            ("max_linear_speed", self.max_linear_speed),
            ("max_angular_speed", self.max_angular_speed),
            ("max_linear_accel", self.max_linear_accel),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::NonPositive(name, value));
            }
        }
        Ok(())
    }

    /// Half-tonne class platform: 470 kg, 5 m/s top speed. The wheel limit
    /// leaves the longitudinal limit binding, so the command polygon is the
    /// wheel-frame diamond with its fast corners cut off.
    pub fn warthog_analog() -> Self {
        RobotGeometry {
            mass: 470.0,
            base_width: 1.5,
            wheel_radius: 0.3,
            body_depth: 2.0,
            body_height: 1.0,
            max_wheel_speed: 18.0,
            max_linear_speed: 5.0,
            max_angular_speed: 8.0,
            max_linear_accel: 4.0,
        }
    }

    /// Small 75 kg platform limited to 1 m/s and 2 rad/s.
    pub fn husky_analog() -> Self {
        RobotGeometry {
            mass: 75.0,
            base_width: 0.555,
            wheel_radius: 0.165,
            body_depth: 0.99,
            body_height: 0.39,
            max_wheel_speed: 7.0,
            max_linear_speed: 1.0,
            max_angular_speed: 2.0,
            max_linear_accel: 2.0,
        }
    }
}

/// Left/right wheel speed pair, rad/s, in the wheel frames.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelCommand {
    pub left: f64,
    pub right: f64,
}

impl WheelCommand {
    pub fn new(left: f64, right: f64) -> Self {
        WheelCommand { left, right }
    }
}

/// Planar body-frame twist: longitudinal, lateral, and yaw rate.
///
/// For *commands* the lateral component is identically zero; a skid-steer
/// cannot be commanded sideways. Measured velocities carry whatever lateral
/// speed the terrain induced.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyVelocity {
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
}

impl BodyVelocity {
    pub fn new(vx: f64, vy: f64, wz: f64) -> Self {
        BodyVelocity { vx, vy, wz }
    }

    /// A command twist: lateral fixed at zero.
    pub fn command(vx: f64, wz: f64) -> Self {
        BodyVelocity { vx, vy: 0.0, wz }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    /// The wheel-to-body map has no lateral degree of freedom, so only
    /// twists with zero lateral speed can be inverted. Hitting this error
    /// usually means a measured (slipping) velocity was passed where a
    /// command was expected.
    #[error("cannot invert a twist with nonzero lateral speed (vy = {0})")]
    LateralVelocity(f64),
}

/// Wheel speeds to body twist under the no-slip differential-drive model.
///
/// vx = r (wl + wr) / 2, wz = r (wr - wl) / b, vy = 0.
pub fn idd_forward(geom: &RobotGeometry, cmd: WheelCommand) -> BodyVelocity {
    let r = geom.wheel_radius;
    let b = geom.base_width;
    BodyVelocity {
        vx: r * (cmd.left + cmd.right) / 2.0,
        vy: 0.0,
        wz: r * (cmd.right - cmd.left) / b,
    }
}

/// Body twist back to wheel speeds. Defined only on the (vx, wz) sub-map;
/// the degenerate lateral row is rejected rather than silently dropped.
pub fn idd_inverse(geom: &RobotGeometry, vel: BodyVelocity) -> Result<WheelCommand, KinematicsError> {
    if vel.vy != 0.0 {
        return Err(KinematicsError::LateralVelocity(vel.vy));
    }
    let r = geom.wheel_radius;
    let b = geom.base_width;
    Ok(WheelCommand {
        left: (vel.vx - vel.wz * b / 2.0) / r,
        right: (vel.vx + vel.wz * b / 2.0) / r,
    })
}

/// Diagonal inertia of the body approximated as a uniform-density box
/// (width x depth x height), kg m^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaMatrix {
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
}

impl InertiaMatrix {
    pub fn diagonal(&self) -> [f64; 3] {
        [self.ixx, self.iyy, self.izz]
    }

    /// Quadratic form w^T I w for a diagonal matrix.
    pub fn rotational_energy_form(&self, w: [f64; 3]) -> f64 {
        self.ixx * w[0] * w[0] + self.iyy * w[1] * w[1] + self.izz * w[2] * w[2]
    }
}

/// I = m/12 diag(b^2 + c^2, d^2 + c^2, d^2 + b^2) for the box model.
pub fn inertia_matrix(geom: &RobotGeometry) -> InertiaMatrix {
    let m = geom.mass;
    let b = geom.base_width;
    let d = geom.body_depth;
    let c = geom.body_height;
    InertiaMatrix {
        ixx: m / 12.0 * (b * b + c * c),
        iyy: m / 12.0 * (d * d + c * c),
        izz: m / 12.0 * (d * d + b * b),
    }
}
