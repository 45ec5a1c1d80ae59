//! Canonical run log format plus the derived CSV emitters.
//!
//! A run log is a single CSV with a `#`-prefixed key=value metadata block,
//! the fixed header line, and one row per 20 Hz sample grouped by episode.
//! All numbers use the shortest decimal form that parses back to the same
//! bits, so write-then-read is exact.

use std::fmt::Write as _;

use thiserror::Error;

use crate::command_space::{CommandPolygon, SampleSet};
use crate::metric::RiskScenario;
use crate::model::{BodyVelocity, RobotGeometry, WheelCommand};
use crate::protocol::{DriveRun, Episode, Sample};
use crate::sim::{Pose, SafeZone, SAMPLE_RATE_HZ, STEP_SECONDS};
use crate::slip::SlipGrid;

pub const LOG_HEADER: &str = "t,episode_id,cmd_wl,cmd_wr,meas_wl,meas_wr,cmd_vx,cmd_wz,meas_vx,meas_vy,meas_wz,pose_x,pose_y,pose_yaw";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("missing metadata key `{0}`")]
    MissingMetadata(&'static str),
    #[error("bad header: expected `{LOG_HEADER}`")]
    BadHeader,
    #[error("episode {id}: has {got} rows, expected {want} (ends at line {line})")]
    ShortEpisode {
        id: u64,
        got: usize,
        want: usize,
        line: usize,
    },
    #[error("line {0}: timestamps not increasing by {STEP_SECONDS} s within episode")]
    BadTimestamp(usize),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

fn push_meta(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "# {key}={value}");
}

/// Serialize a completed run to the log format.
pub fn write_log(run: &DriveRun) -> String {
    let mut out = String::new();
    let g = &run.geometry;
    push_meta(&mut out, "mass", g.mass);
    push_meta(&mut out, "base_width", g.base_width);
    push_meta(&mut out, "wheel_radius", g.wheel_radius);
    push_meta(&mut out, "body_depth", g.body_depth);
    push_meta(&mut out, "body_height", g.body_height);
    push_meta(&mut out, "max_wheel_speed", g.max_wheel_speed);
    push_meta(&mut out, "max_linear_speed", g.max_linear_speed);
    push_meta(&mut out, "max_angular_speed", g.max_angular_speed);
    push_meta(&mut out, "max_linear_accel", g.max_linear_accel);
    push_meta(&mut out, "terrain", &run.terrain_name);
    push_meta(&mut out, "seed", run.seed);
    push_meta(&mut out, "h_calib", run.h_calib);
    push_meta(&mut out, "zone_width", 2.0 * run.zone.half_width);
    push_meta(&mut out, "zone_height", 2.0 * run.zone.half_height);
    push_meta(&mut out, "idle_seconds", run.idle_seconds);
    let interrupts: Vec<String> = run
        .episodes
        .iter()
        .map(|e| e.interrupted_count.to_string())
        .collect();
    push_meta(&mut out, "episode_interrupts", interrupts.join(","));
    out.push_str(LOG_HEADER);
    out.push('\n');
    for (id, ep) in run.episodes.iter().enumerate() {
        for s in &ep.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.t,
                id,
                s.cmd_wheel.left,
                s.cmd_wheel.right,
                s.meas_wheel.left,
                s.meas_wheel.right,
                s.cmd_body.vx,
                s.cmd_body.wz,
                s.meas_body.vx,
                s.meas_body.vy,
                s.meas_body.wz,
                s.pose.x,
                s.pose.y,
                s.pose.yaw,
            );
        }
    }
    out
}

fn parse_field(raw: &str, line: usize, what: &str) -> Result<f64, LogError> {
    raw.parse()
        .map_err(|_| LogError::Parse(line, format!("bad {what}: `{raw}`")))
}

/// Parse a log back into a run. Validates the header, per-episode row
/// counts, and timestamp spacing; errors carry the offending line number.
pub fn read_log(text: &str) -> Result<DriveRun, LogError> {
    let mut meta = String::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, line)) = lines.peek() {
        if let Some(rest) = line.strip_prefix('#') {
            meta.push_str(rest.trim());
            meta.push('\n');
            lines.next();
        } else {
            break;
        }
    }
    let Some((header_idx, header)) = lines.next() else {
        return Err(LogError::BadHeader);
    };
    if header != LOG_HEADER {
        let _ = header_idx;
        return Err(LogError::BadHeader);
    }

    let kv = crate::config::parse_key_values(&meta)?;
    let need = |key: &'static str| kv.get(key).ok_or(LogError::MissingMetadata(key));
    let numeric = |key: &'static str| -> Result<f64, LogError> {
        need(key)?
            .parse()
            .map_err(|_| LogError::Parse(0, format!("bad metadata number for `{key}`")))
    };
    let geometry = RobotGeometry {
        mass: numeric("mass")?,
        base_width: numeric("base_width")?,
        wheel_radius: numeric("wheel_radius")?,
        body_depth: numeric("body_depth")?,
        body_height: numeric("body_height")?,
        max_wheel_speed: numeric("max_wheel_speed")?,
        max_linear_speed: numeric("max_linear_speed")?,
        max_angular_speed: numeric("max_angular_speed")?,
        max_linear_accel: numeric("max_linear_accel")?,
    };
    let terrain_name = need("terrain")?.clone();
    let seed: u64 = need("seed")?
        .parse()
        .map_err(|_| LogError::Parse(0, "bad metadata number for `seed`".into()))?;
    let h_calib = numeric("h_calib")?;
    let zone = SafeZone::from_dimensions(numeric("zone_width")?, numeric("zone_height")?);
    let idle_seconds = numeric("idle_seconds")?;
    let interrupts: Vec<u32> = {
        let raw = need("episode_interrupts")?;
        if raw.is_empty() {
            Vec::new()
        } else {
            raw.split(',')
                .map(|p| {
                    p.parse().map_err(|_| {
                        LogError::Parse(0, format!("bad episode_interrupts entry `{p}`"))
                    })
                })
                .collect::<Result<_, _>>()?
        }
    };

    let rows_per_episode = (h_calib * SAMPLE_RATE_HZ).round() as usize;
    let mut episodes: Vec<Episode> = Vec::new();
    let mut current: Vec<Sample> = Vec::new();
    let mut current_id: Option<u64> = None;
    let mut last_line = header_idx + 1;

    let finish =
        |id: u64, samples: &mut Vec<Sample>, line: usize| -> Result<Episode, LogError> {
            if samples.len() != rows_per_episode {
                return Err(LogError::ShortEpisode {
                    id,
                    got: samples.len(),
                    want: rows_per_episode,
                    line,
                });
            }
            let command = samples.last().expect("nonempty").cmd_wheel;
            Ok(Episode {
                command,
                samples: std::mem::take(samples),
                interrupted_count: 0,
            })
        };

    for (idx, line) in lines {
        let lineno = idx + 1;
        last_line = lineno;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 14 {
            return Err(LogError::Parse(
                lineno,
                format!("expected 14 fields, got {}", parts.len()),
            ));
        }
        let t = parse_field(parts[0], lineno, "t")?;
        let id: u64 = parts[1]
            .parse()
            .map_err(|_| LogError::Parse(lineno, format!("bad episode_id `{}`", parts[1])))?;
        let sample = Sample {
            t,
            cmd_wheel: WheelCommand::new(
                parse_field(parts[2], lineno, "cmd_wl")?,
                parse_field(parts[3], lineno, "cmd_wr")?,
            ),
            meas_wheel: WheelCommand::new(
                parse_field(parts[4], lineno, "meas_wl")?,
                parse_field(parts[5], lineno, "meas_wr")?,
            ),
            cmd_body: BodyVelocity::command(
                parse_field(parts[6], lineno, "cmd_vx")?,
                parse_field(parts[7], lineno, "cmd_wz")?,
            ),
            meas_body: BodyVelocity::new(
                parse_field(parts[8], lineno, "meas_vx")?,
                parse_field(parts[9], lineno, "meas_vy")?,
                parse_field(parts[10], lineno, "meas_wz")?,
            ),
            pose: Pose {
                x: parse_field(parts[11], lineno, "pose_x")?,
                y: parse_field(parts[12], lineno, "pose_y")?,
                yaw: parse_field(parts[13], lineno, "pose_yaw")?,
            },
        };
        match current_id {
            Some(cur) if cur == id => {
                let prev_t = current.last().expect("nonempty").t;
                if ((sample.t - prev_t) - STEP_SECONDS).abs() > 1e-6 || sample.t <= prev_t {
                    return Err(LogError::BadTimestamp(lineno));
                }
                current.push(sample);
            }
            Some(cur) => {
                if id != cur + 1 {
                    return Err(LogError::Parse(
                        lineno,
                        format!("episode_id jumped from {cur} to {id}"),
                    ));
                }
                episodes.push(finish(cur, &mut current, lineno - 1)?);
                current.push(sample);
                current_id = Some(id);
            }
            None => {
                if id != 0 {
                    return Err(LogError::Parse(lineno, format!("first episode_id is {id}")));
                }
                current.push(sample);
                current_id = Some(id);
            }
        }
    }
    if let Some(cur) = current_id {
        episodes.push(finish(cur, &mut current, last_line)?);
    }

    for (ep, count) in episodes.iter_mut().zip(&interrupts) {
        ep.interrupted_count = *count;
    }
    let commands = episodes.iter().map(|e| e.command).collect();
    let productive = episodes.len() as f64 * h_calib;
    Ok(DriveRun {
        geometry,
        terrain_name,
        seed,
        h_calib,
        zone,
        episodes,
        samples: SampleSet { commands, seed },
        idle_seconds,
        total_seconds: productive + idle_seconds,
    })
}

/// Polygon vertex export: `frame,v1,v2` rows, body frame then wheel frame,
/// starting from the lexicographically smallest vertex of each.
pub fn write_polygon_csv(poly: &CommandPolygon) -> String {
    let mut out = String::from("frame,v1,v2\n");
    let rotate = |verts: &[(f64, f64)]| -> Vec<(f64, f64)> {
        let start = verts
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        (0..verts.len())
            .map(|i| verts[(start + i) % verts.len()])
            .collect()
    };
    for (vx, wz) in rotate(poly.body_vertices()) {
        let _ = writeln!(out, "body,{vx},{wz}");
    }
    for (wl, wr) in rotate(poly.wheel_vertices()) {
        let _ = writeln!(out, "wheel,{wl},{wr}");
    }
    out
}

/// Grid export: `vx,wz,value,support` rows; masked nodes leave the value
/// column empty.
pub fn write_grid_csv(grid: &SlipGrid) -> String {
    let mut out = String::from("vx,wz,value,support\n");
    for (i, &vx) in grid.vx_ticks.iter().enumerate() {
        for (j, &wz) in grid.wz_ticks.iter().enumerate() {
            let idx = grid.index(i, j);
            match grid.values[idx] {
                Some(v) => {
                    let _ = writeln!(out, "{vx},{wz},{v},{}", grid.support[idx]);
                }
                None => {
                    let _ = writeln!(out, "{vx},{wz},,{}", grid.support[idx]);
                }
            }
        }
    }
    out
}

/// Per-episode metric export: `episode_id,cmd_vx,cmd_wz,rho,k_u,k_x`.
pub fn write_rho_csv(rows: &[(usize, BodyVelocity, f64, f64, f64)]) -> String {
    let mut out = String::from("episode_id,cmd_vx,cmd_wz,rho,k_u,k_x\n");
    for (id, cmd, rho, k_u, k_x) in rows {
        let _ = writeln!(out, "{id},{},{},{rho},{k_u},{k_x}", cmd.vx, cmd.wz);
    }
    out
}

/// Risk scenario export with the flat-ground energy ceiling as metadata.
pub fn write_risk_csv(scenarios: &[RiskScenario], max_energy: f64) -> String {
    let mut out = String::new();
    push_meta(&mut out, "max_kinetic_energy", max_energy);
    out.push_str(
        "terrain,motion,count,median_rho,median_kx,ellipse_rho,ellipse_kx,\
         ellipse_semi_major,ellipse_semi_minor,ellipse_angle\n",
    );
    for s in scenarios {
        let motion = match s.motion {
            crate::metric::MotionFilter::All => "all",
            crate::metric::MotionFilter::Only(c) => c.name(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.terrain,
            motion,
            s.count,
            s.median_rho,
            s.median_energy,
            s.ellipse.center.0,
            s.ellipse.center.1,
            s.ellipse.semi_major,
            s.ellipse.semi_minor,
            s.ellipse.angle,
        );
    }
    out
}
