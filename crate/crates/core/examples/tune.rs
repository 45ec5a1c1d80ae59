//! Calibration report used while freezing preset constants.

use std::time::Instant;

use drive_core::command_space::build_polygon;
use drive_core::io::write_log;
use drive_core::metric::{metric_grid, rho_of_sample};
use drive_core::model::{idd_inverse, BodyVelocity, RobotGeometry};
use drive_core::protocol::{run_drive, segment, DriveOptions};
use drive_core::sim::SafeZone;
use drive_core::slip::{
    auto_covariance, compute_slip, smooth_grid, KernelMode, SlipChannel, SlipSample,
};
use drive_core::terrain::{steady_state_velocity, TerrainModel};

fn slips_for(geom: &RobotGeometry, terrain: &TerrainModel, s: usize, seed: u64) -> Vec<SlipSample> {
    let poly = build_polygon(geom).unwrap();
    let dim = 1.5 * geom.max_linear_speed * 6.0;
    let zone = SafeZone::from_dimensions(dim + 5.0, dim + 5.0);
    let run = run_drive(geom, &poly, terrain, &zone, &DriveOptions::new(s, seed)).unwrap();
    run.episodes
        .iter()
        .map(|e| compute_slip(&segment(e, geom).unwrap()))
        .collect()
}

fn truth(geom: &RobotGeometry, terrain: &TerrainModel, vx: f64, wz: f64, ch: SlipChannel) -> f64 {
    let u = BodyVelocity::command(vx, wz);
    let wheel = idd_inverse(geom, u).unwrap();
    let (w_ss, b_ss) = steady_state_velocity(geom, terrain, wheel);
    match ch {
        SlipChannel::BodyVx => u.vx - b_ss.vx,
        SlipChannel::BodyVy => -b_ss.vy,
        SlipChannel::BodyWz => u.wz - b_ss.wz,
        SlipChannel::WheelLeft => wheel.left - w_ss.left,
        SlipChannel::WheelRight => wheel.right - w_ss.right,
    }
}

fn grid_rmse(geom: &RobotGeometry, terrain_name: &str, seed: u64) {
    let mut terrain = TerrainModel::preset(terrain_name, geom).unwrap();
    terrain.noise_std = 0.05;
    let start = Instant::now();
    let samples = slips_for(geom, &terrain, 150, seed);
    let poly = build_polygon(geom).unwrap();
    let points: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.command_body.vx, s.command_body.wz))
        .collect();
    let cov = auto_covariance(&points, geom, &poly, 0.1).unwrap();
    print!(
        "{:8} sigma^2={:.3} ",
        terrain_name, cov.var_vx
    );
    for ch in [
        SlipChannel::BodyVx,
        SlipChannel::BodyVy,
        SlipChannel::BodyWz,
        SlipChannel::WheelLeft,
        SlipChannel::WheelRight,
    ] {
        let grid = smooth_grid(&samples, ch, geom, &poly, 0.1, &cov, KernelMode::Gaussian).unwrap();
        let mut sq = 0.0;
        let mut n = 0usize;
        let mut worst: f64 = 0.0;
        for (i, &vx) in grid.vx_ticks.iter().enumerate() {
            for (j, &wz) in grid.wz_ticks.iter().enumerate() {
                if let Some(v) = grid.value(i, j) {
                    let t = truth(geom, &terrain, vx, wz, ch);
                    sq += (v - t) * (v - t);
                    worst = worst.max((v - t).abs());
                    n += 1;
                }
            }
        }
        let rmse = (sq / n as f64).sqrt();
        print!("{}={:.3}/{:.2} ", ch.name(), rmse, worst);
    }
    println!("[{} nodes valid, {:.1}s]", 0, start.elapsed().as_secs_f64());
}

fn main() {
    let warthog = RobotGeometry::warthog_analog();
    let husky = RobotGeometry::husky_analog();

    println!("== grid RMSE (value=rmse/worst) ==");
    for t in ["perfect", "asphalt", "grass", "gravel", "sand", "mud", "ice"] {
        grid_rmse(&warthog, t, 1234);
    }
    for t in ["asphalt", "grass", "mud"] {
        print!("husky ");
        grid_rmse(&husky, t, 99);
    }

    println!("\n== husky angular slip medians (targets 0.735 / 0.708 / 0.690) ==");
    for name in ["mud", "grass", "asphalt"] {
        let terrain = TerrainModel::preset(name, &husky).unwrap();
        let samples = slips_for(&husky, &terrain, 150, 2024);
        let mut mags: Vec<f64> = samples.iter().map(|s| s.body_slip.wz.abs()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = mags[mags.len() / 2];
        let mut cmd_mags: Vec<f64> = samples.iter().map(|s| s.command_body.wz.abs()).collect();
        cmd_mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "{:8} median|g_wz|={:.3}  median|u_wz|={:.3}",
            name,
            median,
            cmd_mags[cmd_mags.len() / 2]
        );
    }

    println!("\n== warthog rho medians ==");
    let mut rho_medians = Vec::new();
    for name in ["asphalt", "grass", "gravel", "sand", "mud", "ice"] {
        let terrain = TerrainModel::preset(name, &warthog).unwrap();
        let samples = slips_for(&warthog, &terrain, 150, 777);
        let mut rhos: Vec<f64> = samples
            .iter()
            .map(|s| rho_of_sample(&warthog, s))
            .collect();
        rhos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = rhos[rhos.len() / 2];
        println!("{:8} median rho = {:.3}", name, median);
        rho_medians.push((name, median));
    }
    let ice = rho_medians.iter().find(|(n, _)| *n == "ice").unwrap().1;
    let asphalt = rho_medians.iter().find(|(n, _)| *n == "asphalt").unwrap().1;
    println!("ice/asphalt ratio = {:.3} (target 1.6 +- 0.3)", ice / asphalt);

    println!("\n== warthog turn-in-place rho floor (reference 0.39) ==");
    for name in ["asphalt", "ice"] {
        let terrain = TerrainModel::preset(name, &warthog).unwrap();
        let samples = slips_for(&warthog, &terrain, 150, 555);
        let poly = build_polygon(&warthog).unwrap();
        let points: Vec<(f64, f64)> = samples
            .iter()
            .map(|s| (s.command_body.vx, s.command_body.wz))
            .collect();
        let cov = auto_covariance(&points, &warthog, &poly, 0.1).unwrap();
        let grid = metric_grid(&samples, &warthog, &poly, 0.1, &cov, KernelMode::Gaussian).unwrap();
        // rho along the vx ~ 0 column, wz away from zero.
        let i0 = grid
            .vx_ticks
            .iter()
            .position(|&v| v.abs() < 0.051)
            .unwrap();
        let mut min_rho = f64::INFINITY;
        for (j, &wz) in grid.wz_ticks.iter().enumerate() {
            if wz.abs() > 0.5 {
                if let Some(v) = grid.value(i0, j) {
                    min_rho = min_rho.min(v);
                }
            }
        }
        println!("{:8} min rho on turn-in-place column = {:.3}", name, min_rho);
    }

    println!("\n== efficiency sanity (warthog grass, 1100 m^2 analog zone) ==");
    let terrain = TerrainModel::preset("grass", &warthog).unwrap();
    let poly = build_polygon(&warthog).unwrap();
    let zone = SafeZone::from_dimensions(24.0, 46.0);
    let start = Instant::now();
    let run = run_drive(&warthog, &poly, &terrain, &zone, &DriveOptions::new(150, 31)).unwrap();
    let report = drive_core::protocol::efficiency_report(&run);
    println!(
        "fraction={:.3} distance={:.0} m interrupts={} wall={:.1}s log_bytes={}",
        report.data_time_fraction,
        report.distance_m,
        report.interrupts,
        start.elapsed().as_secs_f64(),
        write_log(&run).len()
    );
}
