//! Command-hold protocol runner.
//!
//! Draws the sample set, holds each command for the calibration duration
//! while watching the safe zone, and segments each completed recording into
//! one transient window followed by two steady windows.

use thiserror::Error;

use crate::command_space::{sample_uniform, CommandPolygon, SampleSet};
use crate::model::{idd_forward, BodyVelocity, RobotGeometry, WheelCommand};
use crate::sim::{
    minimum_area_check, minimum_zone_dimension, operator_check, Measurement, Pose, SafeZone,
    Simulator, SAMPLE_RATE_HZ,
};
use crate::terrain::TerrainModel;

/// Default hold duration per command, s.
pub const DEFAULT_CALIB_SECONDS: f64 = 6.0;
/// Default interruption look-ahead, s.
pub const DEFAULT_HORIZON_SECONDS: f64 = 2.0;

/// One logged tick of an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// Command at the motors this tick (body frame), after the ramp.
    pub cmd_body: BodyVelocity,
    /// The same command in the wheel frame.
    pub cmd_wheel: WheelCommand,
    pub meas_wheel: WheelCommand,
    pub meas_body: BodyVelocity,
    pub pose: Pose,
}

/// One completed command hold: the sampled command and its time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub command: WheelCommand,
    pub samples: Vec<Sample>,
    pub interrupted_count: u32,
}

impl Episode {
    pub fn command_body(&self, geom: &RobotGeometry) -> BodyVelocity {
        idd_forward(geom, self.command)
    }
}

/// An episode split 1/3 transient + 2/3 steady, with steady-window means.
#[derive(Debug, Clone)]
pub struct WindowedEpisode {
    pub command_wheel: WheelCommand,
    pub command_body: BodyVelocity,
    pub transient: Vec<Sample>,
    pub steady: [Vec<Sample>; 2],
    pub steady_mean_wheel: WheelCommand,
    pub steady_mean_body: BodyVelocity,
    /// Dispersion diagnostic over the final window: std(vx) / max(|mean vx|, 0.1).
    /// Recorded, not enforced; long-lag terrains show up here.
    pub steadiness: f64,
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("safe zone {width} x {height} m too small: needs one dimension >= {needed} m")]
    ZoneTooSmall { width: f64, height: f64, needed: f64 },
    #[error("calibration duration {0} s must be a positive multiple of three samples")]
    BadCalibDuration(f64),
    #[error("episode has {got} samples, expected {want}")]
    IncompleteEpisode { got: usize, want: usize },
    #[error(transparent)]
    CommandSpace(#[from] crate::command_space::CommandSpaceError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

#[derive(Debug, Clone)]
pub struct DriveOptions {
    pub sample_count: usize,
    pub h_calib: f64,
    pub seed: u64,
    pub horizon: f64,
}

impl DriveOptions {
    pub fn new(sample_count: usize, seed: u64) -> Self {
        DriveOptions {
            sample_count,
            h_calib: DEFAULT_CALIB_SECONDS,
            seed,
            horizon: DEFAULT_HORIZON_SECONDS,
        }
    }

    /// Samples per completed episode.
    pub fn steps_per_episode(&self) -> usize {
        (self.h_calib * SAMPLE_RATE_HZ).round() as usize
    }
}

/// A completed protocol run.
#[derive(Debug, Clone)]
pub struct DriveRun {
    pub geometry: RobotGeometry,
    pub terrain_name: String,
    pub seed: u64,
    pub h_calib: f64,
    pub zone: SafeZone,
    pub episodes: Vec<Episode>,
    pub samples: SampleSet,
    /// Time spent reorienting or in discarded partial holds, s.
    pub idle_seconds: f64,
    pub total_seconds: f64,
}

/// Run the full protocol: sample `s` commands uniformly, hold each for
/// `h_calib` seconds, restart interrupted holds with a cleared buffer.
pub fn run_drive(
    geom: &RobotGeometry,
    poly: &CommandPolygon,
    terrain: &TerrainModel,
    zone: &SafeZone,
    opts: &DriveOptions,
) -> Result<DriveRun, ProtocolError> {
    if !minimum_area_check(geom, zone) {
        return Err(ProtocolError::ZoneTooSmall {
            width: 2.0 * zone.half_width,
            height: 2.0 * zone.half_height,
            needed: minimum_zone_dimension(geom),
        });
    }
    let steps = opts.steps_per_episode();
    if steps == 0 || steps % 3 != 0 {
        return Err(ProtocolError::BadCalibDuration(opts.h_calib));
    }

    let samples = sample_uniform(poly, opts.sample_count, opts.seed)?;
    // Separate noise stream so changing the sample count does not reshuffle
    // measurement noise.
    let mut sim = Simulator::new(geom, terrain, opts.seed ^ 0x9e37_79b9_7f4a_7c15)?;

    let mut episodes = Vec::with_capacity(samples.commands.len());
    for &cmd in &samples.commands {
        episodes.push(run_episode(&mut sim, zone, cmd, steps, opts.horizon));
    }

    let total_seconds = sim.clock();
    let productive = episodes.len() as f64 * opts.h_calib;
    Ok(DriveRun {
        geometry: geom.clone(),
        terrain_name: terrain.name.clone(),
        seed: opts.seed,
        h_calib: opts.h_calib,
        zone: *zone,
        episodes,
        samples,
        idle_seconds: total_seconds - productive,
        total_seconds,
    })
}

/// Hold one command until a full buffer is recorded. An interrupt clears
/// the buffer, reorients toward (or away from, for reverse commands) the
/// zone center, and restarts the hold.
pub fn run_episode(
    sim: &mut Simulator,
    zone: &SafeZone,
    cmd: WheelCommand,
    steps: usize,
    horizon: f64,
) -> Episode {
    let target = idd_forward(sim.geometry(), cmd);
    let mut buffer: Vec<Sample> = Vec::with_capacity(steps);
    let mut interrupted_count = 0;
    while buffer.len() < steps {
        if operator_check(sim.state(), zone, horizon) {
            interrupted_count += 1;
            buffer.clear();
            sim.reorient(target);
            continue;
        }
        sim.step(target);
        let m: Measurement = sim.measure();
        let effective = sim.effective_command();
        // Once the ramp has snapped to the target the row carries the
        // sampled wheel command itself, bit for bit.
        let cmd_wheel = if effective == target {
            cmd
        } else {
            crate::model::idd_inverse(sim.geometry(), effective)
                .expect("effective command has zero lateral speed")
        };
        buffer.push(Sample {
            t: m.t,
            cmd_body: effective,
            cmd_wheel,
            meas_wheel: m.wheel_speeds,
            meas_body: m.body_velocity,
            pose: m.pose,
        });
    }
    Episode {
        command: cmd,
        samples: buffer,
        interrupted_count,
    }
}

/// Split a complete episode into transient + two steady windows and average
/// the steady ones.
pub fn segment(ep: &Episode, geom: &RobotGeometry) -> Result<WindowedEpisode, ProtocolError> {
    let n = ep.samples.len();
    if n == 0 || n % 3 != 0 {
        return Err(ProtocolError::IncompleteEpisode {
            got: n,
            want: n + (3 - n % 3) % 3,
        });
    }
    let w = n / 3;
    let transient = ep.samples[..w].to_vec();
    let steady_a = ep.samples[w..2 * w].to_vec();
    let steady_b = ep.samples[2 * w..].to_vec();

    let steady = &ep.samples[w..];
    let count = steady.len() as f64;
    let mean_wheel = WheelCommand::new(
        steady.iter().map(|s| s.meas_wheel.left).sum::<f64>() / count,
        steady.iter().map(|s| s.meas_wheel.right).sum::<f64>() / count,
    );
    let mean_body = BodyVelocity::new(
        steady.iter().map(|s| s.meas_body.vx).sum::<f64>() / count,
        steady.iter().map(|s| s.meas_body.vy).sum::<f64>() / count,
        steady.iter().map(|s| s.meas_body.wz).sum::<f64>() / count,
    );

    let last = &steady_b;
    let m = last.iter().map(|s| s.meas_body.vx).sum::<f64>() / last.len() as f64;
    let var = last.iter().map(|s| (s.meas_body.vx - m).powi(2)).sum::<f64>() / last.len() as f64;
    let steadiness = var.sqrt() / m.abs().max(0.1);

    Ok(WindowedEpisode {
        command_wheel: ep.command,
        command_body: ep.command_body(geom),
        transient,
        steady: [steady_a, steady_b],
        steady_mean_wheel: mean_wheel,
        steady_mean_body: mean_body,
        steadiness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyReport {
    /// Fraction of wall time spent recording usable data.
    pub data_time_fraction: f64,
    /// Distance covered while recording, integrated over logged poses, m.
    pub distance_m: f64,
    pub total_time_s: f64,
    pub interrupts: u32,
}

pub fn efficiency_report(run: &DriveRun) -> EfficiencyReport {
    let productive = run.episodes.len() as f64 * run.h_calib;
    let mut distance = 0.0;
    for ep in &run.episodes {
        for pair in ep.samples.windows(2) {
            let (a, b) = (pair[0].pose, pair[1].pose);
            distance += ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        }
    }
    EfficiencyReport {
        data_time_fraction: productive / (productive + run.idle_seconds),
        distance_m: distance,
        total_time_s: run.total_seconds,
        interrupts: run.episodes.iter().map(|e| e.interrupted_count).sum(),
    }
}

impl std::fmt::Display for EfficiencyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "data time {:.3}, distance {:.1} m, total {:.1} s, {} interrupts",
            self.data_time_fraction, self.distance_m, self.total_time_s, self.interrupts
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command_space::build_polygon;
    use crate::sim::STEP_SECONDS;

    fn setup(terrain: &str) -> (RobotGeometry, CommandPolygon, TerrainModel, SafeZone) {
        let geom = RobotGeometry::warthog_analog();
        let poly = build_polygon(&geom).unwrap();
        let t = TerrainModel::preset(terrain, &geom).unwrap();
        let zone = SafeZone::from_dimensions(60.0, 60.0);
        (geom, poly, t, zone)
    }

    #[test]
    fn single_episode_completes_without_interrupts() {
        let (geom, poly, terrain, zone) = setup("perfect");
        let run = run_drive(&geom, &poly, &terrain, &zone, &DriveOptions::new(1, 5)).unwrap();
        assert_eq!(run.episodes.len(), 1);
        assert_eq!(run.episodes[0].samples.len(), 120);
        assert_eq!(run.episodes[0].interrupted_count, 0);
        assert_eq!(run.samples.commands.len(), 1);
    }

    #[test]
    fn zone_too_small_fails_before_simulation() {
        let (geom, poly, terrain, _) = setup("perfect");
        let err = run_drive(
            &geom,
            &poly,
            &terrain,
            &SafeZone::from_dimensions(10.0, 10.0),
            &DriveOptions::new(1, 5),
        )
        .unwrap_err();
        assert!(matches!(err, ProtocolError::ZoneTooSmall { .. }));
    }

    #[test]
    fn timestamps_are_strictly_increasing_at_rate() {
        let (geom, poly, terrain, zone) = setup("perfect");
        let run = run_drive(&geom, &poly, &terrain, &zone, &DriveOptions::new(3, 8)).unwrap();
        for ep in &run.episodes {
            for pair in ep.samples.windows(2) {
                let dt = pair[1].t - pair[0].t;
                assert!((dt - STEP_SECONDS).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn boundary_hit_restarts_with_full_buffer() {
        // Minimum-size zone and enough fast commands: some episode must be
        // interrupted, and every buffer must still come out complete.
        let (geom, poly, terrain, _) = setup("perfect");
        let zone = SafeZone::from_dimensions(20.0, 45.0);
        let run = run_drive(&geom, &poly, &terrain, &zone, &DriveOptions::new(20, 3)).unwrap();
        let interrupts: u32 = run.episodes.iter().map(|e| e.interrupted_count).sum();
        assert!(interrupts >= 1, "expected at least one interrupt");
        for ep in &run.episodes {
            assert_eq!(ep.samples.len(), 120);
        }
        assert!(run.idle_seconds > 0.0);
    }

    #[test]
    fn same_seed_reproduces_sample_set() {
        let (geom, poly, terrain, zone) = setup("grass");
        let a = run_drive(&geom, &poly, &terrain, &zone, &DriveOptions::new(5, 21)).unwrap();
        let b = run_drive(&geom, &poly, &terrain, &zone, &DriveOptions::new(5, 21)).unwrap();
        assert_eq!(a.samples.commands, b.samples.commands);
        assert_eq!(a.episodes, b.episodes);
    }

    #[test]
    fn segment_splits_40_40_40() {
        let (geom, poly, terrain, zone) = setup("perfect");
        let run = run_drive(&geom, &poly, &terrain, &zone, &DriveOptions::new(1, 5)).unwrap();
        let w = segment(&run.episodes[0], &geom).unwrap();
        assert_eq!(w.transient.len(), 40);
        assert_eq!(w.steady[0].len(), 40);
        assert_eq!(w.steady[1].len(), 40);
    }

    #[test]
    fn segment_rejects_incomplete_episode() {
        let (geom, poly, terrain, zone) = setup("perfect");
        let run = run_drive(&geom, &poly, &terrain, &zone, &DriveOptions::new(1, 5)).unwrap();
        let mut ep = run.episodes[0].clone();
        ep.samples.truncate(119);
        assert!(segment(&ep, &geom).is_err());
    }

    #[test]
    fn steady_mean_of_constant_signal_is_exact() {
        let mk = |vx: f64| Sample {
            t: 0.0,
            cmd_body: BodyVelocity::command(vx, 0.0),
            cmd_wheel: WheelCommand::default(),
            meas_wheel: WheelCommand::new(1.0, 1.0),
            meas_body: BodyVelocity::new(vx, 0.0, 0.0),
            pose: Pose::default(),
        };
        let ep = Episode {
            command: WheelCommand::default(),
            samples: (0..120).map(|_| mk(1.5)).collect(),
            interrupted_count: 0,
        };
        let w = segment(&ep, &RobotGeometry::warthog_analog()).unwrap();
        assert_eq!(w.steady_mean_body.vx, 1.5);
    }

    #[test]
    fn steady_mean_of_exponential_approach_is_near_asymptote() {
        // v(t) = 1 - e^(-t/tau), tau = 0.3 s: the mean over the last four
        // seconds is within 1% of the asymptote (closed form ~0.9999).
        let tau = 0.3;
        let samples: Vec<Sample> = (1..=120)
            .map(|i| {
                let t = i as f64 * STEP_SECONDS;
                let v = 1.0 - (-t / tau).exp();
                Sample {
                    t,
                    cmd_body: BodyVelocity::command(1.0, 0.0),
                    cmd_wheel: WheelCommand::default(),
                    meas_wheel: WheelCommand::default(),
                    meas_body: BodyVelocity::new(v, 0.0, 0.0),
                    pose: Pose::default(),
                }
            })
            .collect();
        let ep = Episode {
            command: WheelCommand::default(),
            samples,
            interrupted_count: 0,
        };
        let w = segment(&ep, &RobotGeometry::warthog_analog()).unwrap();
        assert!((w.steady_mean_body.vx - 1.0).abs() < 0.01);
    }

    #[test]
    fn steady_mean_stays_in_sample_hull() {
        let (geom, poly, terrain, zone) = setup("ice");
        let run = run_drive(&geom, &poly, &terrain, &zone, &DriveOptions::new(4, 17)).unwrap();
        for ep in &run.episodes {
            let w = segment(ep, &geom).unwrap();
            let steady = &ep.samples[40..];
            for (value, pick) in [
                (w.steady_mean_body.vx, &(|s: &Sample| s.meas_body.vx) as &dyn Fn(&Sample) -> f64),
                (w.steady_mean_body.vy, &|s: &Sample| s.meas_body.vy),
                (w.steady_mean_body.wz, &|s: &Sample| s.meas_body.wz),
            ] {
                let lo = steady.iter().map(|s| pick(s)).fold(f64::INFINITY, f64::min);
                let hi = steady.iter().map(|s| pick(s)).fold(f64::NEG_INFINITY, f64::max);
                assert!(value >= lo && value <= hi);
            }
        }
    }

    #[test]
    fn efficiency_without_interrupts_is_one() {
        let (geom, poly, terrain, zone) = setup("perfect");
        let run = run_drive(&geom, &poly, &terrain, &zone, &DriveOptions::new(1, 5)).unwrap();
        let report = efficiency_report(&run);
        assert_eq!(report.data_time_fraction, 1.0);
        assert_eq!(report.interrupts, 0);
    }

    #[test]
    fn straight_six_second_episode_covers_expected_distance() {
        let geom = RobotGeometry::warthog_analog();
        let mut terrain = TerrainModel::preset("perfect", &geom).unwrap();
        terrain.tau = 1e-9;
        let zone = SafeZone::from_dimensions(100.0, 100.0);
        let mut sim = Simulator::new(&geom, &terrain, 0).unwrap();
        let cmd = crate::model::idd_inverse(&geom, BodyVelocity::command(2.0, 0.0)).unwrap();
        let ep = run_episode(&mut sim, &zone, cmd, 120, 2.0);
        let first = ep.samples.first().unwrap().pose;
        let last = ep.samples.last().unwrap().pose;
        let dist = ((last.x - first.x).powi(2) + (last.y - first.y).powi(2)).sqrt();
        // 12 m minus the 0.5 s acceleration ramp distance.
        assert!((dist - 12.0).abs() < 0.6, "distance {dist}");
    }
}
