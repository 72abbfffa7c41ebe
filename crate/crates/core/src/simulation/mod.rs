//! Closed-loop team simulation: robots with drifting odometry observe
//! walking pedestrians and static landmarks, track them cooperatively, and
//! realign their frames while the run is logged for evaluation.

mod config;
mod runlog;
mod runner;
mod sensors;
mod world;

pub use config::{
    Arena, CommConfig, DetectionNoise, ErrorInjection, EvalConfig, Fov, LandmarkNoise,
    Localization, NoiseConfig, OdomNoise, RealignConfig, RealignMode, RobotConfig, ScenarioConfig,
    TrackingConfig, Trajectory, WaypointPath,
};
pub use runlog::{
    evaluate, read_summary, AlignmentRow, Evaluation, GtRow, RunLog, TimingRow, TimingSummary,
    TrackRow,
};
pub use runner::run_scenario;
pub use sensors::{
    detect_landmarks, detect_pedestrians, in_fov, inject_alignment_error, integrate,
    select_realign_mode, step_odometry, OdomStep, RobotView, HEADING_PER_METER_DEG,
};
pub use world::{pedestrian_position, robot_pose, walk};
