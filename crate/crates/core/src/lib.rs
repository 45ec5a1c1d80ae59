//! System identification toolkit for skid-steer ground robots.
//!
//! The crate covers the whole identification loop: build the admissible
//! command polygon from a platform's wheel and body limits, sample it
//! uniformly, drive a simulated robot-terrain pairing through six-second
//! command holds inside a safe zone, and turn the recordings into slip
//! transfer-function grids, an unpredictability metric, and risk-plot
//! coordinates.

pub mod command_space;
pub mod config;
pub mod io;
pub mod metric;
pub mod model;
pub mod protocol;
pub mod sim;
pub mod slip;
pub mod terrain;

pub use command_space::{build_polygon, clamp_transition, sample_uniform, CommandPolygon, SampleSet};
pub use model::{
    idd_forward, idd_inverse, inertia_matrix, BodyVelocity, InertiaMatrix, RobotGeometry,
    WheelCommand,
};
pub use protocol::{run_drive, segment, DriveOptions, DriveRun, Episode, WindowedEpisode};
pub use sim::{minimum_area_check, operator_check, SafeZone, SimState, Simulator};
pub use slip::{
    compute_slip, kernel_weight, slip_distribution, smooth_grid, KernelCovariance, KernelMode,
    SlipChannel, SlipGrid, SlipSample,
};
pub use terrain::{steady_state_velocity, TerrainModel};

pub use metric::{
    alignment_penalties, kinetic_energies, metric_grid, risk_points, unpredictability,
    MotionClass, MotionFilter, RiskPoint, RiskScenario, VelocityPair,
};
