//! Kinetic-energy unpredictability metric and risk-plot coordinates.
//!
//! The metric compares the kinetic energy implied by a command with the one
//! actually measured, weighted by how well the motion directions align. The
//! arctan2 form maps the energy ratio onto [0, 1]: 0 for perfect tracking,
//! 1 for a commanded vehicle that does not move at all.

use std::f64::consts::{FRAC_PI_4, PI};

use thiserror::Error;

use crate::command_space::CommandPolygon;
use crate::model::{inertia_matrix, BodyVelocity, RobotGeometry};
use crate::slip::{smooth_values_grid, KernelCovariance, KernelMode, SlipError, SlipGrid, SlipSample};

/// Full rigid-body velocity: translation m/s, rotation rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralVelocity {
    pub translation: [f64; 3],
    pub rotation: [f64; 3],
}

impl GeneralVelocity {
    /// Planar reduction: (vx, vy) translation, yaw-only rotation.
    pub fn planar(v: &BodyVelocity) -> Self {
        GeneralVelocity {
            translation: [v.vx, v.vy, 0.0],
            rotation: [0.0, 0.0, v.wz],
        }
    }
}

/// Commanded and measured velocity pair for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityPair {
    pub commanded: GeneralVelocity,
    pub measured: GeneralVelocity,
}

impl VelocityPair {
    pub fn planar(commanded: &BodyVelocity, measured: &BodyVelocity) -> Self {
        VelocityPair {
            commanded: GeneralVelocity::planar(commanded),
            measured: GeneralVelocity::planar(measured),
        }
    }
}

/// Translational and rotational kinetic energy, J.
pub fn kinetic_energies(geom: &RobotGeometry, vel: &GeneralVelocity) -> (f64, f64) {
    let t = vel.translation;
    let k_t = geom.mass / 2.0 * (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
    let k_r = 0.5 * inertia_matrix(geom).rotational_energy_form(vel.rotation);
    (k_t, k_r)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Alignment penalties (alpha, beta) in [0, 1]: 1 for parallel commanded
/// and measured vectors, 0 for antiparallel. A zero vector on either side
/// carries no direction information, so its penalty stays at 1; magnitude
/// mismatch is the energy terms' job.
pub fn alignment_penalties(u: &GeneralVelocity, x: &GeneralVelocity) -> (f64, f64) {
    let pen = |a: [f64; 3], b: [f64; 3]| {
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 || nb == 0.0 {
            1.0
        } else {
            0.5 * (dot(a, b) / (na * nb) + 1.0)
        }
    };
    (
        pen(u.translation, x.translation),
        pen(u.rotation, x.rotation),
    )
}

/// Metric from the two total energies: (4/pi) |arctan2(K_u, K_x) - pi/4|.
///
/// Both energies zero means a stationary vehicle commanded to stay still,
/// which is perfectly predicted; that case returns 0. `rho_from_energies_literal`
/// keeps the raw formula, where arctan2(0, 0) = 0 yields 1.
pub fn rho_from_energies(k_u: f64, k_x: f64) -> f64 {
    if k_u == 0.0 && k_x == 0.0 {
        return 0.0;
    }
    rho_from_energies_literal(k_u, k_x)
}

pub fn rho_from_energies_literal(k_u: f64, k_x: f64) -> f64 {
    4.0 / PI * (f64::atan2(k_u, k_x) - FRAC_PI_4).abs()
}

/// Unpredictability of one commanded/measured pair.
pub fn unpredictability(geom: &RobotGeometry, pair: &VelocityPair) -> f64 {
    let (k_ut, k_ur) = kinetic_energies(geom, &pair.commanded);
    let (k_xt, k_xr) = kinetic_energies(geom, &pair.measured);
    let (alpha, beta) = alignment_penalties(&pair.commanded, &pair.measured);
    rho_from_energies(k_ut + k_ur, alpha * k_xt + beta * k_xr)
}

/// Weighted measured kinetic energy of a pair, the risk-severity proxy.
pub fn measured_energy(geom: &RobotGeometry, pair: &VelocityPair) -> f64 {
    let (k_xt, k_xr) = kinetic_energies(geom, &pair.measured);
    let (alpha, beta) = alignment_penalties(&pair.commanded, &pair.measured);
    alpha * k_xt + beta * k_xr
}

/// Per-episode unpredictability from a slip sample.
pub fn rho_of_sample(geom: &RobotGeometry, s: &SlipSample) -> f64 {
    let pair = VelocityPair::planar(&s.command_body, &s.measured_body());
    unpredictability(geom, &pair)
}

/// Smoothed unpredictability grid over the command space: same smoother as
/// the slip channels with per-sample rho as the value.
pub fn metric_grid(
    samples: &[SlipSample],
    geom: &RobotGeometry,
    poly: &CommandPolygon,
    resolution: f64,
    cov: &KernelCovariance,
    mode: KernelMode,
) -> Result<SlipGrid, SlipError> {
    let points: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.command_body.vx, s.command_body.wz))
        .collect();
    let values: Vec<f64> = samples.iter().map(|s| rho_of_sample(geom, s)).collect();
    smooth_values_grid(&points, &values, geom, poly, resolution, cov, mode)
}

/// Motion regime of an episode, by which normalized channel dominates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionClass {
    Forward,
    Turning,
}

impl MotionClass {
    pub fn classify(geom: &RobotGeometry, cmd: &BodyVelocity) -> Self {
        if cmd.vx.abs() / geom.max_linear_speed >= cmd.wz.abs() / geom.max_angular_speed {
            MotionClass::Forward
        } else {
            MotionClass::Turning
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MotionClass::Forward => "forward",
            MotionClass::Turning => "turning",
        }
    }
}

/// Filter for which episodes enter a risk scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MotionFilter {
    #[default]
    All,
    Only(MotionClass),
}

impl MotionFilter {
    fn accepts(&self, class: MotionClass) -> bool {
        match self {
            MotionFilter::All => true,
            MotionFilter::Only(c) => *c == class,
        }
    }
}

/// One (rho, measured energy) observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskPoint {
    pub rho: f64,
    pub measured_energy: f64,
    pub terrain: String,
    pub motion: MotionClass,
}

/// 95% covariance ellipse of a 2D point cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Orientation of the major axis, rad.
    pub angle: f64,
}

/// Median point plus dispersion ellipse for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskScenario {
    pub terrain: String,
    pub motion: MotionFilter,
    pub count: usize,
    pub median_rho: f64,
    pub median_energy: f64,
    pub ellipse: Ellipse,
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("scenario `{terrain}` has {got} samples, needs at least {want}")]
    TooFewScenarioSamples {
        terrain: String,
        got: usize,
        want: usize,
    },
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Chi-square(2 dof) quantile at 0.95: the 95%-mass scaling of a 2D
/// Gaussian covariance ellipse.
const CHI2_2_95: f64 = 5.991464547107979;

fn covariance_ellipse(points: &[(f64, f64)]) -> Ellipse {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    let denom = (n - 1.0).max(1.0);
    sxx /= denom;
    syy /= denom;
    sxy /= denom;
    // Eigen-decomposition of the 2x2 symmetric covariance.
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l1 = tr / 2.0 + disc;
    let l2 = (tr / 2.0 - disc).max(0.0);
    let angle = if sxy.abs() < 1e-30 {
        if sxx >= syy {
            0.0
        } else {
            std::f64::consts::FRAC_PI_2
        }
    } else {
        (l1 - sxx).atan2(sxy)
    };
    Ellipse {
        center: (mx, my),
        semi_major: (CHI2_2_95 * l1).sqrt(),
        semi_minor: (CHI2_2_95 * l2).sqrt(),
        angle,
    }
}

/// Risk points of one run's slip samples, tagged by terrain and motion.
pub fn risk_points(
    samples: &[SlipSample],
    geom: &RobotGeometry,
    terrain: &str,
    filter: MotionFilter,
) -> Vec<RiskPoint> {
    samples
        .iter()
        .filter_map(|s| {
            let class = MotionClass::classify(geom, &s.command_body);
            if !filter.accepts(class) {
                return None;
            }
            let pair = VelocityPair::planar(&s.command_body, &s.measured_body());
            Some(RiskPoint {
                rho: unpredictability(geom, &pair),
                measured_energy: measured_energy(geom, &pair),
                terrain: terrain.to_string(),
                motion: class,
            })
        })
        .collect()
}

/// Summarize one scenario: median coordinates and the 95% ellipse.
pub fn summarize_scenario(
    points: &[RiskPoint],
    terrain: &str,
    filter: MotionFilter,
) -> Result<RiskScenario, MetricError> {
    if points.len() < 5 {
        return Err(MetricError::TooFewScenarioSamples {
            terrain: terrain.to_string(),
            got: points.len(),
            want: 5,
        });
    }
    let mut rhos: Vec<f64> = points.iter().map(|p| p.rho).collect();
    let mut energies: Vec<f64> = points.iter().map(|p| p.measured_energy).collect();
    let cloud: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.rho, p.measured_energy))
        .collect();
    Ok(RiskScenario {
        terrain: terrain.to_string(),
        motion: filter,
        count: points.len(),
        median_rho: median(&mut rhos),
        median_energy: median(&mut energies),
        ellipse: covariance_ellipse(&cloud),
    })
}

/// Largest kinetic energy reachable on flat ground: evaluated at the
/// command polygon's vertices, where speed is extremal.
pub fn max_theoretical_energy(geom: &RobotGeometry, poly: &CommandPolygon) -> f64 {
    poly.body_vertices()
        .iter()
        .map(|&(vx, wz)| {
            let v = GeneralVelocity::planar(&BodyVelocity::command(vx, wz));
            let (kt, kr) = kinetic_energies(geom, &v);
            kt + kr
        })
        .fold(0.0, f64::max)
}
