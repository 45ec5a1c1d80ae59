//! Plain key=value configuration files for robot geometry and terrain.
//!
//! Lines are `key=value`; `#` starts a comment. Terrain files start from the
//! named preset (or a zero-slip base for unknown names) and override any
//! listed field.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::RobotGeometry;
use crate::terrain::TerrainModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: expected `key=value`, got `{1}`")]
    Malformed(usize, String),
    #[error("line {0}: duplicate key `{1}`")]
    DuplicateKey(usize, String),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{0}`: invalid number `{1}`")]
    BadNumber(String, String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error(transparent)]
    Geometry(#[from] crate::model::GeometryError),
    #[error(transparent)]
    Terrain(#[from] crate::terrain::TerrainError),
}

pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Malformed(i + 1, raw.to_string()));
        };
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(ConfigError::DuplicateKey(i + 1, key));
        }
    }
    Ok(map)
}

fn number(map: &BTreeMap<String, String>, key: &'static str) -> Result<f64, ConfigError> {
    let raw = map.get(key).ok_or(ConfigError::MissingKey(key))?;
    raw.parse()
        .map_err(|_| ConfigError::BadNumber(key.to_string(), raw.clone()))
}

pub fn parse_geometry(text: &str) -> Result<RobotGeometry, ConfigError> {
    let map = parse_key_values(text)?;
    for key in map.keys() {
        if !GEOMETRY_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
    }
    let geom = RobotGeometry {
        mass: number(&map, "mass")?,
        base_width: number(&map, "base_width")?,
        wheel_radius: number(&map, "wheel_radius")?,
        body_depth: number(&map, "body_depth")?,
        body_height: number(&map, "body_height")?,
        max_wheel_speed: number(&map, "max_wheel_speed")?,
        max_linear_speed: number(&map, "max_linear_speed")?,
        max_angular_speed: number(&map, "max_angular_speed")?,
        max_linear_accel: number(&map, "max_linear_accel")?,
    };
    geom.validate()?;
    Ok(geom)
}

const GEOMETRY_KEYS: [&str; 9] = [
    "mass",
    "base_width",
    "wheel_radius",
    "body_depth",
    "body_height",
    "max_wheel_speed",
    "max_linear_speed",
    "max_angular_speed",
    "max_linear_accel",
];

pub fn geometry_to_config(geom: &RobotGeometry) -> String {
    format!(
        "mass={}\nbase_width={}\nwheel_radius={}\nbody_depth={}\nbody_height={}\n\
         max_wheel_speed={}\nmax_linear_speed={}\nmax_angular_speed={}\nmax_linear_accel={}\n",
        geom.mass,
        geom.base_width,
        geom.wheel_radius,
        geom.body_depth,
        geom.body_height,
        geom.max_wheel_speed,
        geom.max_linear_speed,
        geom.max_angular_speed,
        geom.max_linear_accel,
    )
}

/// Terrain from a config file: `name=` picks the preset base, remaining
/// keys override individual fields.
pub fn parse_terrain(text: &str, geom: &RobotGeometry) -> Result<TerrainModel, ConfigError> {
    let map = parse_key_values(text)?;
    let name = map
        .get("name")
        .ok_or(ConfigError::MissingKey("name"))?
        .clone();
    let mut t = match TerrainModel::preset(&name, geom) {
        Ok(t) => t,
        Err(_) => {
            let mut base = TerrainModel::perfect();
            base.name = name.clone();
            base
        }
    };
    for (key, raw) in &map {
        if key == "name" {
            continue;
        }
        let value: f64 = raw
            .parse()
            .map_err(|_| ConfigError::BadNumber(key.clone(), raw.clone()))?;
        match key.as_str() {
            "tau" => t.tau = value,
            "noise_std" => t.noise_std = value,
            "wheel_gain_left" => t.wheel_gain_left = value,
            "wheel_gain_right" => t.wheel_gain_right = value,
            "wheel_diff_gain" => t.wheel_diff_gain = value,
            "wheel_ref_speed" => t.wheel_ref_speed = value,
            "body_vx_gain" => t.body_vx_gain = value,
            "body_vx_reach" => t.body_vx_reach = value,
            "body_wz_gain" => t.body_wz_gain = value,
            "body_wz_slope" => t.body_wz_slope = value,
            "body_wz_norm" => t.body_wz_norm = value,
            "body_wz_backlash" => t.body_wz_backlash = value,
            "body_backlash_scale" => t.body_backlash_scale = value,
            "body_wz_reach" => t.body_wz_reach = value,
            "body_drift_gain" => t.body_drift_gain = value,
            "body_drift_norm" => t.body_drift_norm = value,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
    }
    t.validate()?;
    Ok(t)
}
