//! Steady-state slip extraction and kernel-smoothed transfer-function grids.
//!
//! Per-episode slip is the commanded minus the realized steady mean, in both
//! frames. Grids interpolate those scattered samples onto a uniform lattice
//! over the body-frame command space with a 2D Gaussian kernel.

use thiserror::Error;

use crate::command_space::CommandPolygon;
use crate::model::{BodyVelocity, RobotGeometry, WheelCommand};
use crate::protocol::WindowedEpisode;

/// Nodes whose kernel support falls below this fraction of the best node
/// are reported as missing rather than extrapolated.
pub const LOW_SUPPORT_FRACTION: f64 = 0.01;

/// Slip distribution comparisons only use commands within this envelope.
pub const DISTRIBUTION_VX_LIMIT: f64 = 4.0;
pub const DISTRIBUTION_WZ_LIMIT: f64 = 4.0;

/// Per-episode steady-state slip in both frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipSample {
    pub command_wheel: WheelCommand,
    pub command_body: BodyVelocity,
    /// Commanded minus realized wheel speeds, rad/s.
    pub wheel_slip: WheelCommand,
    /// Commanded minus realized body velocity (vx m/s, vy m/s, wz rad/s).
    pub body_slip: BodyVelocity,
}

impl SlipSample {
    /// Realized steady body velocity implied by command minus slip.
    pub fn measured_body(&self) -> BodyVelocity {
        BodyVelocity::new(
            self.command_body.vx - self.body_slip.vx,
            -self.body_slip.vy,
            self.command_body.wz - self.body_slip.wz,
        )
    }
}

/// Scalar channels that can be gridded or summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlipChannel {
    BodyVx,
    BodyVy,
    BodyWz,
    WheelLeft,
    WheelRight,
}

impl SlipChannel {
    pub fn extract(&self, s: &SlipSample) -> f64 {
        match self {
            SlipChannel::BodyVx => s.body_slip.vx,
            SlipChannel::BodyVy => s.body_slip.vy,
            SlipChannel::BodyWz => s.body_slip.wz,
            SlipChannel::WheelLeft => s.wheel_slip.left,
            SlipChannel::WheelRight => s.wheel_slip.right,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "gx" => Some(SlipChannel::BodyVx),
            "gy" => Some(SlipChannel::BodyVy),
            "gtheta" => Some(SlipChannel::BodyWz),
            "wheel_l" => Some(SlipChannel::WheelLeft),
            "wheel_r" => Some(SlipChannel::WheelRight),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SlipChannel::BodyVx => "gx",
            SlipChannel::BodyVy => "gy",
            SlipChannel::BodyWz => "gtheta",
            SlipChannel::WheelLeft => "wheel_l",
            SlipChannel::WheelRight => "wheel_r",
        }
    }
}

#[derive(Debug, Error)]
pub enum SlipError {
    #[error("kernel covariance entries must be positive, got ({0}, {1})")]
    BadCovariance(f64, f64),
    #[error("grid resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("no slip samples provided")]
    NoSamples,
    #[error("need at least {want} samples after filtering, got {got}")]
    TooFewSamples { want: usize, got: usize },
}

/// Eq-style slip: command minus steady mean, component-wise. The lateral
/// channel is pure negated measurement since the commanded lateral speed
/// is identically zero.
pub fn compute_slip(w: &WindowedEpisode) -> SlipSample {
    SlipSample {
        command_wheel: w.command_wheel,
        command_body: w.command_body,
        wheel_slip: WheelCommand::new(
            w.command_wheel.left - w.steady_mean_wheel.left,
            w.command_wheel.right - w.steady_mean_wheel.right,
        ),
        body_slip: BodyVelocity::new(
            w.command_body.vx - w.steady_mean_body.vx,
            -w.steady_mean_body.vy,
            w.command_body.wz - w.steady_mean_body.wz,
        ),
    }
}

/// Diagonal 2x2 kernel covariance over the (vx, wz) command plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCovariance {
    pub var_vx: f64,
    pub var_wz: f64,
}

impl KernelCovariance {
    pub fn isotropic(variance: f64) -> Self {
        KernelCovariance {
            var_vx: variance,
            var_wz: variance,
        }
    }

    pub fn validate(&self) -> Result<(), SlipError> {
        if self.var_vx > 0.0 && self.var_wz > 0.0 {
            Ok(())
        } else {
            Err(SlipError::BadCovariance(self.var_vx, self.var_wz))
        }
    }
}

/// Exponent convention for the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelMode {
    /// Standard Gaussian: exp(-1/2 d^T S^-1 d).
    #[default]
    Gaussian,
    /// Exponent written without the -1/2 factor. Kept for comparison only:
    /// weights *grow* with distance, so grids built this way are dominated
    /// by the farthest samples.
    StrictPositiveExponent,
}

/// Kernel weight of a sample at distance (u - node) under covariance S:
/// k = 1/(2 pi sqrt(|S|)) exp(-1/2 d^T S^-1 d).
pub fn kernel_weight(
    sample: (f64, f64),
    node: (f64, f64),
    cov: &KernelCovariance,
    mode: KernelMode,
) -> Result<f64, SlipError> {
    cov.validate()?;
    let dx = sample.0 - node.0;
    let dz = sample.1 - node.1;
    let quad = dx * dx / cov.var_vx + dz * dz / cov.var_wz;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * (cov.var_vx * cov.var_wz).sqrt());
    let exponent = match mode {
        KernelMode::Gaussian => -0.5 * quad,
        KernelMode::StrictPositiveExponent => quad,
    };
    Ok(norm * exponent.exp())
}

/// Smoothed uniform grid over the body-frame command plane.
#[derive(Debug, Clone)]
pub struct SlipGrid {
    pub vx_ticks: Vec<f64>,
    pub wz_ticks: Vec<f64>,
    /// Row-major over (vx index, wz index); None marks masked nodes.
    pub values: Vec<Option<f64>>,
    pub support: Vec<f64>,
}

impl SlipGrid {
    pub fn index(&self, ivx: usize, iwz: usize) -> usize {
        ivx * self.wz_ticks.len() + iwz
    }

    pub fn value(&self, ivx: usize, iwz: usize) -> Option<f64> {
        self.values[self.index(ivx, iwz)]
    }
}

fn ticks(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step - 1e-9).ceil().max(0.0) as usize + 1;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Weighted-average smoothing of scattered (point, value) data onto the
/// node lattice. Nodes with zero accumulated weight come out as None.
pub fn smooth_points(
    points: &[(f64, f64)],
    values: &[f64],
    vx_ticks: &[f64],
    wz_ticks: &[f64],
    cov: &KernelCovariance,
    mode: KernelMode,
) -> Result<(Vec<Option<f64>>, Vec<f64>), SlipError> {
    cov.validate()?;
    if points.is_empty() {
        return Err(SlipError::NoSamples);
    }
    assert_eq!(points.len(), values.len());
    let mut out = Vec::with_capacity(vx_ticks.len() * wz_ticks.len());
    let mut support = Vec::with_capacity(out.capacity());
    for &vx in vx_ticks {
        for &wz in wz_ticks {
            let mut wsum = 0.0;
            let mut vsum = 0.0;
            for (p, g) in points.iter().zip(values) {
                let k = kernel_weight(*p, (vx, wz), cov, mode)?;
                wsum += k;
                vsum += k * g;
            }
            support.push(wsum);
            out.push(if wsum > 0.0 { Some(vsum / wsum) } else { None });
        }
    }
    Ok((out, support))
}

/// Build the smoothed transfer-function grid for one slip channel over the
/// polygon's bounding box. Nodes outside the polygon or with support below
/// `LOW_SUPPORT_FRACTION` of the maximum are masked.
pub fn smooth_grid(
    samples: &[SlipSample],
    channel: SlipChannel,
    geom: &RobotGeometry,
    poly: &CommandPolygon,
    resolution: f64,
    cov: &KernelCovariance,
    mode: KernelMode,
) -> Result<SlipGrid, SlipError> {
    let values: Vec<f64> = samples.iter().map(|s| channel.extract(s)).collect();
    let points: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.command_body.vx, s.command_body.wz))
        .collect();
    smooth_values_grid(&points, &values, geom, poly, resolution, cov, mode)
}

/// Grid smoothing of arbitrary per-sample scalars located at body-frame
/// commands; shared by the slip channels and the unpredictability grid.
pub fn smooth_values_grid(
    points: &[(f64, f64)],
    values: &[f64],
    geom: &RobotGeometry,
    poly: &CommandPolygon,
    resolution: f64,
    cov: &KernelCovariance,
    mode: KernelMode,
) -> Result<SlipGrid, SlipError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(SlipError::BadResolution(resolution));
    }
    let ((vx_lo, wz_lo), (vx_hi, wz_hi)) = poly.body_bbox();
    let vx_ticks = ticks(vx_lo, vx_hi, resolution);
    let wz_ticks = ticks(wz_lo, wz_hi, resolution);
    let (mut values, support) = smooth_points(points, values, &vx_ticks, &wz_ticks, cov, mode)?;

    let max_support = support.iter().cloned().fold(0.0, f64::max);
    let threshold = LOW_SUPPORT_FRACTION * max_support;
    let mut idx = 0;
    for &vx in &vx_ticks {
        for &wz in &wz_ticks {
            let inside = poly.contains_body(geom, BodyVelocity::command(vx, wz));
            if !inside || support[idx] < threshold {
                values[idx] = None;
            }
            idx += 1;
        }
    }
    Ok(SlipGrid {
        vx_ticks,
        wz_ticks,
        values,
        support,
    })
}

/// Enlarge an isotropic kernel until, averaged over in-polygon nodes, at
/// least four samples fall within one standard deviation.
pub fn auto_covariance(
    samples: &[(f64, f64)],
    geom: &RobotGeometry,
    poly: &CommandPolygon,
    resolution: f64,
) -> Result<KernelCovariance, SlipError> {
    if samples.len() < 4 {
        return Err(SlipError::TooFewSamples {
            want: 4,
            got: samples.len(),
        });
    }
    let ((vx_lo, wz_lo), (vx_hi, wz_hi)) = poly.body_bbox();
    let nodes: Vec<(f64, f64)> = ticks(vx_lo, vx_hi, resolution)
        .iter()
        .flat_map(|&vx| {
            ticks(wz_lo, wz_hi, resolution)
                .iter()
                .map(|&wz| (vx, wz))
                .collect::<Vec<_>>()
        })
        .filter(|&(vx, wz)| poly.contains_body(geom, BodyVelocity::command(vx, wz)))
        .collect();

    let mut sigma = resolution.max(1e-6);
    let diag = ((vx_hi - vx_lo).powi(2) + (wz_hi - wz_lo).powi(2)).sqrt();
    loop {
        let total: usize = nodes
            .iter()
            .map(|&(nx, nz)| {
                samples
                    .iter()
                    .filter(|&&(sx, sz)| {
                        (sx - nx).powi(2) + (sz - nz).powi(2) <= sigma * sigma
                    })
                    .count()
            })
            .sum();
        if total as f64 / nodes.len() as f64 >= 4.0 || sigma > diag {
            break;
        }
        sigma *= 1.05;
    }
    Ok(KernelCovariance::isotropic(sigma * sigma))
}

/// Quantile summary of one slip channel across episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSummary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub p2_5: f64,
    pub p97_5: f64,
}

/// Linear-interpolation quantile over sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// Distribution of one channel over the comparison envelope
/// (|vx| <= 4 m/s, |wz| <= 4 rad/s). Needs at least five surviving samples.
pub fn slip_distribution(
    samples: &[SlipSample],
    channel: SlipChannel,
) -> Result<DistributionSummary, SlipError> {
    let mut values: Vec<f64> = samples
        .iter()
        .filter(|s| {
            s.command_body.vx.abs() <= DISTRIBUTION_VX_LIMIT
                && s.command_body.wz.abs() <= DISTRIBUTION_WZ_LIMIT
        })
        .map(|s| channel.extract(s))
        .collect();
    if values.len() < 5 {
        return Err(SlipError::TooFewSamples {
            want: 5,
            got: values.len(),
        });
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(DistributionSummary {
        median: quantile(&values, 0.5),
        q1: quantile(&values, 0.25),
        q3: quantile(&values, 0.75),
        p2_5: quantile(&values, 0.025),
        p97_5: quantile(&values, 0.975),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command_space::build_polygon;
    use crate::model::RobotGeometry;

    fn sample_at(vx: f64, wz: f64, slip: BodyVelocity) -> SlipSample {
        SlipSample {
            command_wheel: WheelCommand::default(),
            command_body: BodyVelocity::command(vx, wz),
            wheel_slip: WheelCommand::default(),
            body_slip: slip,
        }
    }

    #[test]
    fn kernel_peak_value() {
        let cov = KernelCovariance::isotropic(1.0);
        let k = kernel_weight((0.0, 0.0), (0.0, 0.0), &cov, KernelMode::Gaussian).unwrap();
        assert!((k - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn kernel_one_sigma_value() {
        let cov = KernelCovariance::isotropic(1.0);
        let k = kernel_weight((1.0, 0.0), (0.0, 0.0), &cov, KernelMode::Gaussian).unwrap();
        let want = (-0.5f64).exp() / (2.0 * std::f64::consts::PI);
        assert!((k - want).abs() < 1e-15);
    }

    #[test]
    fn kernel_monotone_in_distance() {
        let cov = KernelCovariance::isotropic(0.64);
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let d = i as f64 * 0.1;
            let k = kernel_weight((d, 0.0), (0.0, 0.0), &cov, KernelMode::Gaussian).unwrap();
            assert!(k < prev);
            prev = k;
        }
    }

    #[test]
    fn kernel_rejects_bad_covariance() {
        let cov = KernelCovariance {
            var_vx: 0.0,
            var_wz: 1.0,
        };
        assert!(kernel_weight((0.0, 0.0), (0.0, 0.0), &cov, KernelMode::Gaussian).is_err());
    }

    #[test]
    fn strict_mode_grows_with_distance() {
        let cov = KernelCovariance::isotropic(1.0);
        let near =
            kernel_weight((0.1, 0.0), (0.0, 0.0), &cov, KernelMode::StrictPositiveExponent)
                .unwrap();
        let far =
            kernel_weight((2.0, 0.0), (0.0, 0.0), &cov, KernelMode::StrictPositiveExponent)
                .unwrap();
        assert!(far > near);
    }

    #[test]
    fn single_sample_fills_grid_with_its_value() {
        let geom = RobotGeometry::warthog_analog();
        let poly = build_polygon(&geom).unwrap();
        let s = sample_at(1.0, 0.5, BodyVelocity::new(0.3, 0.0, 0.0));
        let grid = smooth_grid(
            &[s],
            SlipChannel::BodyVx,
            &geom,
            &poly,
            0.5,
            &KernelCovariance::isotropic(1.0),
            KernelMode::Gaussian,
        )
        .unwrap();
        for v in grid.values.iter().flatten() {
            assert!((v - 0.3).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_pair_averages_at_midpoint() {
        let geom = RobotGeometry::warthog_analog();
        let poly = build_polygon(&geom).unwrap();
        let a = sample_at(-1.0, 0.0, BodyVelocity::new(0.2, 0.0, 0.0));
        let b = sample_at(1.0, 0.0, BodyVelocity::new(0.6, 0.0, 0.0));
        let cov = KernelCovariance::isotropic(1.0);
        let (values, _) = smooth_points(
            &[(-1.0, 0.0), (1.0, 0.0)],
            &[0.2, 0.6],
            &[0.0],
            &[0.0],
            &cov,
            KernelMode::Gaussian,
        )
        .unwrap();
        assert!((values[0].unwrap() - 0.4).abs() < 1e-12);
        let _ = (a, b, geom, poly);
    }

    #[test]
    fn smoothing_is_convex_combination() {
        let geom = RobotGeometry::warthog_analog();
        let poly = build_polygon(&geom).unwrap();
        let samples: Vec<SlipSample> = (0..40)
            .map(|i| {
                let f = i as f64;
                sample_at(
                    -4.0 + 0.2 * f,
                    3.0 - 0.15 * f,
                    BodyVelocity::new((f * 0.37).sin(), 0.0, 0.0),
                )
            })
            .collect();
        let grid = smooth_grid(
            &samples,
            SlipChannel::BodyVx,
            &geom,
            &poly,
            0.5,
            &KernelCovariance::isotropic(0.64),
            KernelMode::Gaussian,
        )
        .unwrap();
        let lo = samples
            .iter()
            .map(|s| s.body_slip.vx)
            .fold(f64::INFINITY, f64::min);
        let hi = samples
            .iter()
            .map(|s| s.body_slip.vx)
            .fold(f64::NEG_INFINITY, f64::max);
        for v in grid.values.iter().flatten() {
            assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }

    #[test]
    fn smoothing_is_shift_equivariant() {
        let cov = KernelCovariance::isotropic(0.5);
        let points = [(0.3, -0.2), (1.1, 0.7), (-0.4, 0.9), (0.0, 0.0)];
        let values = [1.0, -2.0, 0.5, 3.0];
        let nodes_x = [-0.5, 0.0, 0.5];
        let nodes_z = [-0.5, 0.0, 0.5];
        let (base, _) =
            smooth_points(&points, &values, &nodes_x, &nodes_z, &cov, KernelMode::Gaussian)
                .unwrap();
        let (dx, dz) = (2.7, -1.3);
        let shifted_points: Vec<(f64, f64)> =
            points.iter().map(|p| (p.0 + dx, p.1 + dz)).collect();
        let shifted_x: Vec<f64> = nodes_x.iter().map(|x| x + dx).collect();
        let shifted_z: Vec<f64> = nodes_z.iter().map(|z| z + dz).collect();
        let (shifted, _) = smooth_points(
            &shifted_points,
            &values,
            &shifted_x,
            &shifted_z,
            &cov,
            KernelMode::Gaussian,
        )
        .unwrap();
        for (a, b) in base.iter().zip(&shifted) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn vanishing_kernel_approaches_nearest_sample() {
        let cov = KernelCovariance::isotropic(1e-4);
        let points = [(0.0, 0.0), (1.0, 0.0)];
        let values = [5.0, -5.0];
        let (out, _) = smooth_points(
            &points,
            &values,
            &[0.3],
            &[0.0],
            &cov,
            KernelMode::Gaussian,
        )
        .unwrap();
        assert!((out[0].unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn empty_sample_list_rejected() {
        let cov = KernelCovariance::isotropic(1.0);
        assert!(matches!(
            smooth_points(&[], &[], &[0.0], &[0.0], &cov, KernelMode::Gaussian),
            Err(SlipError::NoSamples)
        ));
    }

    #[test]
    fn quantiles_of_evenly_spaced_values() {
        let samples: Vec<SlipSample> = (0..=100)
            .map(|i| sample_at(0.0, 0.0, BodyVelocity::new(i as f64 / 100.0, 0.0, 0.0)))
            .collect();
        let d = slip_distribution(&samples, SlipChannel::BodyVx).unwrap();
        assert!((d.median - 0.5).abs() < 1e-12);
        assert!((d.q1 - 0.25).abs() < 1e-12);
        assert!((d.q3 - 0.75).abs() < 1e-12);
        assert!((d.p2_5 - 0.025).abs() < 1e-12);
        assert!((d.p97_5 - 0.975).abs() < 1e-12);
    }

    #[test]
    fn all_equal_samples_collapse_quantiles() {
        let samples: Vec<SlipSample> = (0..10)
            .map(|_| sample_at(1.0, 1.0, BodyVelocity::new(0.7, 0.0, 0.0)))
            .collect();
        let d = slip_distribution(&samples, SlipChannel::BodyVx).unwrap();
        assert_eq!((d.median, d.q1, d.q3), (0.7, 0.7, 0.7));
    }

    #[test]
    fn distribution_requires_five_samples_within_envelope() {
        // Nine samples but only four inside the comparison envelope.
        let mut samples: Vec<SlipSample> = (0..4)
            .map(|i| sample_at(i as f64 * 0.5, 0.0, BodyVelocity::default()))
            .collect();
        for i in 0..5 {
            samples.push(sample_at(6.0 + i as f64, 0.0, BodyVelocity::default()));
        }
        assert!(slip_distribution(&samples, SlipChannel::BodyVx).is_err());
    }
}
