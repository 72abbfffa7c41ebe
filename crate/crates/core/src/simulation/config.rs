use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose2};
use crate::network::CommGraph;
use crate::registration::{AlignParams, CovScale, IcpParams};
use crate::tracking::{GateParams, TrackParams};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub width_m: f64,
    pub height_m: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Self {
            width_m: 10.0,
            height_m: 10.0,
        }
    }
}

impl Arena {
    fn contains(&self, p: Point2) -> bool {
        (0.0..=self.width_m).contains(&p.x) && (0.0..=self.height_m).contains(&p.y)
    }
}

/// Range-limited wedge centered on the robot heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fov {
    pub range_m: f64,
    pub half_angle_rad: f64,
}

impl Default for Fov {
    fn default() -> Self {
        Self {
            range_m: 6.0,
            half_angle_rad: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Closed polyline walked at constant speed with instant turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPath {
    pub waypoints: Vec<[f64; 2]>,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Trajectory {
    Static {
        pose: Pose2,
    },
    /// Counter-clockwise circle; the robot faces along its direction of
    /// travel.
    Circular {
        center: [f64; 2],
        radius_m: f64,
        angular_rate_rps: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    Waypoints(WaypointPath),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub trajectory: Trajectory,
    #[serde(default)]
    pub fov: Fov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdomNoise {
    /// Per-step standard deviation of each translation component (m).
    pub sigma_v: f64,
    /// Per-step standard deviation of the heading increment (rad).
    pub sigma_omega: f64,
}

impl Default for OdomNoise {
    fn default() -> Self {
        Self {
            sigma_v: 0.0,
            sigma_omega: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionNoise {
    /// Actual detection noise (m).
    pub sigma_m: f64,
    /// Noise level the tracker assumes; defaults to `sigma_m`.
    pub reported_sigma_m: Option<f64>,
    pub p_detect: f64,
    /// Mean clutter detections per robot per frame.
    pub clutter_rate: f64,
}

impl Default for DetectionNoise {
    fn default() -> Self {
        Self {
            sigma_m: 0.05,
            reported_sigma_m: None,
            p_detect: 0.95,
            clutter_rate: 0.0,
        }
    }
}

impl DetectionNoise {
    pub fn reported(&self) -> f64 {
        self.reported_sigma_m.unwrap_or(self.sigma_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandmarkNoise {
    pub sigma_m: f64,
    pub p_detect: f64,
}

impl Default for LandmarkNoise {
    fn default() -> Self {
        Self {
            sigma_m: 0.03,
            p_detect: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub odom: OdomNoise,
    pub detection: DetectionNoise,
    pub landmark: LandmarkNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorInjection {
    pub sigma_t_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RealignMode {
    #[default]
    Off,
    Static,
    Dynamic,
    Auto,
}

impl RealignMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RealignMode::Off => "off",
            RealignMode::Static => "static",
            RealignMode::Dynamic => "dynamic",
            RealignMode::Auto => "auto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RealignConfig {
    pub mode: RealignMode,
    /// Co-detections needed for dynamic realignment in auto mode.
    pub tau_eta: usize,
    /// Frames of co-detections kept per pair.
    pub window_frames: u64,
    pub map_share_hz: f64,
    pub reactive_gate: bool,
    /// Standard deviations of the initial alignment covariance.
    pub initial_sigma_t_m: f64,
    pub initial_sigma_theta_rad: f64,
    pub merge_radius_m: f64,
    /// Landmarks unseen for longer than this many frames are pruned.
    pub map_horizon_frames: u64,
    pub icp: IcpParams,
    pub w_max: f64,
    pub eps_d: f64,
}

impl Default for RealignConfig {
    fn default() -> Self {
        Self {
            mode: RealignMode::Off,
            tau_eta: 100,
            window_frames: 50,
            map_share_hz: 1.0,
            reactive_gate: false,
            initial_sigma_t_m: 0.0,
            initial_sigma_theta_rad: 0.0,
            merge_radius_m: 0.5,
            map_horizon_frames: 150,
            icp: IcpParams::default(),
            w_max: 1e4,
            eps_d: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingConfig {
    pub tau_gate: f64,
    /// White-noise acceleration intensity (m²/s³).
    pub q: f64,
    #[serde(flatten)]
    pub track: TrackParams,
    #[serde(flatten)]
    pub gate: GateParams,
    #[serde(flatten)]
    pub cov_scale: CovScale,
    /// Inflate measurement covariance with the robot's pose uncertainty.
    pub use_pose_cov: bool,
    /// Include frame-alignment covariance in shared measurements.
    pub use_alignment_cov: bool,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            tau_gate: 2.0,
            q: 0.5,
            track: TrackParams::default(),
            gate: GateParams::default(),
            cov_scale: CovScale::default(),
            use_pose_cov: true,
            use_alignment_cov: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CommConfig {
    /// Undirected edges; empty means fully connected.
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Localization {
    #[default]
    Estimated,
    /// Exact poses and frame alignments; no drift and no injected error.
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub d_match_m: f64,
    pub window_s: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            d_match_m: 1.0,
            window_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub arena: Arena,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub rng_seed: u64,
    pub robots: Vec<RobotConfig>,
    #[serde(default)]
    pub pedestrians: Vec<WaypointPath>,
    #[serde(default)]
    pub landmarks: Vec<[f64; 2]>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub error_injection: Option<ErrorInjection>,
    #[serde(default)]
    pub realign: RealignConfig,
    #[serde(default)]
    pub tracking: TrackingConfig,
    #[serde(default)]
    pub comm: CommConfig,
    #[serde(default)]
    pub localization: Localization,
    #[serde(default)]
    pub evaluation: EvalConfig,
    /// Record wall-clock stage timings (makes timings.csv nondeterministic).
    #[serde(default)]
    pub timings: bool,
}

fn default_name() -> String {
    "scenario".to_string()
}

fn default_frame_rate() -> f64 {
    10.0
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn finite_nonneg(v: f64, what: &str) -> Result<()> {
    check(v.is_finite() && v >= 0.0, || {
        format!("{what} must be finite and non-negative, got {v}")
    })
}

fn probability(v: f64, what: &str) -> Result<()> {
    check((0.0..=1.0).contains(&v), || {
        format!("{what} must lie in [0, 1], got {v}")
    })
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::Config(format!("file not found: {}", path.display()))
            }
            _ => Error::Io(e),
        })?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(e))))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario configs serialize")
    }

    pub fn frame_count(&self) -> u64 {
        (self.duration_s * self.frame_rate_hz).round() as u64
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate_hz
    }

    pub fn comm_graph(&self) -> Result<CommGraph> {
        let n = self.robots.len();
        if self.comm.edges.is_empty() {
            return Ok(CommGraph::complete(n));
        }
        let edges: Vec<(usize, usize)> = self.comm.edges.iter().map(|e| (e[0], e[1])).collect();
        CommGraph::from_edges(n, &edges)
    }

    pub fn align_params(&self) -> AlignParams {
        AlignParams {
            icp: self.realign.icp,
            cov_scale: self.tracking.cov_scale,
            w_max: self.realign.w_max,
            eps_d: self.realign.eps_d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0,
            || format!("frame_rate_hz must be positive, got {}", self.frame_rate_hz),
        )?;
        check(self.duration_s.is_finite() && self.duration_s > 0.0, || {
            format!("duration_s must be positive, got {}", self.duration_s)
        })?;
        check(self.frame_count() >= 1, || {
            "scenario must span at least one frame".into()
        })?;
        check(
            self.arena.width_m > 0.0 && self.arena.height_m > 0.0,
            || "arena dimensions must be positive".into(),
        )?;
        check(!self.robots.is_empty(), || {
            "at least one robot is required".into()
        })?;

        for (i, r) in self.robots.iter().enumerate() {
            check(r.fov.range_m > 0.0 && r.fov.half_angle_rad > 0.0, || {
                format!("robot {i}: field of view must have positive range and half-angle")
            })?;
            match &r.trajectory {
                Trajectory::Static { pose } => {
                    check(self.arena.contains(pose.translation()), || {
                        format!("robot {i}: static pose lies outside the arena")
                    })?
                }
                Trajectory::Circular {
                    center,
                    radius_m,
                    angular_rate_rps,
                    ..
                } => {
                    check(*radius_m > 0.0 && angular_rate_rps.is_finite(), || {
                        format!("robot {i}: circular trajectory needs a positive radius")
                    })?;
                    let c = Point2::new(center[0], center[1]);
                    let inside = self
                        .arena
                        .contains(Point2::new(c.x - radius_m, c.y - radius_m))
                        && self
                            .arena
                            .contains(Point2::new(c.x + radius_m, c.y + radius_m));
                    check(inside, || {
                        format!("robot {i}: circular trajectory leaves the arena")
                    })?;
                }
                Trajectory::Waypoints(p) => self.check_path(p, &format!("robot {i}"))?,
            }
        }
        for (k, p) in self.pedestrians.iter().enumerate() {
            self.check_path(p, &format!("pedestrian {k}"))?;
        }
        for (k, l) in self.landmarks.iter().enumerate() {
            check(self.arena.contains(Point2::new(l[0], l[1])), || {
                format!("landmark {k} lies outside the arena")
            })?;
        }

        let n = &self.noise;
        finite_nonneg(n.odom.sigma_v, "noise.odom.sigma_v")?;
        finite_nonneg(n.odom.sigma_omega, "noise.odom.sigma_omega")?;
        finite_nonneg(n.detection.sigma_m, "noise.detection.sigma_m")?;
        check(
            n.detection.reported() > 0.0 && n.detection.reported().is_finite(),
            || "noise.detection.reported_sigma_m must be positive".into(),
        )?;
        probability(n.detection.p_detect, "noise.detection.p_detect")?;
        finite_nonneg(n.detection.clutter_rate, "noise.detection.clutter_rate")?;
        finite_nonneg(n.landmark.sigma_m, "noise.landmark.sigma_m")?;
        probability(n.landmark.p_detect, "noise.landmark.p_detect")?;
        if let Some(e) = &self.error_injection {
            finite_nonneg(e.sigma_t_m, "error_injection.sigma_t_m")?;
        }

        let r = &self.realign;
        check(r.window_frames >= 1, || {
            "realign.window_frames must be at least 1".into()
        })?;
        check(
            r.map_share_hz >= 0.0 && r.map_share_hz <= self.frame_rate_hz,
            || "realign.map_share_hz must lie in [0, frame_rate_hz]".into(),
        )?;
        finite_nonneg(r.initial_sigma_t_m, "realign.initial_sigma_t_m")?;
        finite_nonneg(r.initial_sigma_theta_rad, "realign.initial_sigma_theta_rad")?;
        check(r.merge_radius_m > 0.0, || {
            "realign.merge_radius_m must be positive".into()
        })?;
        check(
            r.icp.max_iter >= 1
                && r.icp.tol_m > 0.0
                && r.icp.reject_radius_m > 0.0
                && r.icp.min_pairs >= 2
                && r.icp.max_rms_m > 0.0,
            || "realign.icp parameters must be positive".into(),
        )?;

        let t = &self.tracking;
        check(t.tau_gate > 0.0, || {
            "tracking.tau_gate must be positive".into()
        })?;
        finite_nonneg(t.q, "tracking.q")?;
        check(t.track.n_confirm >= 1, || {
            "tracking.n_confirm must be at least 1".into()
        })?;
        check(t.track.v_max > 0.0, || {
            "tracking.v_max must be positive".into()
        })?;
        check(t.track.gain_cap > 0.0, || {
            "tracking.gain_cap must be positive".into()
        })?;
        check(t.track.nominal_meas_var > 0.0, || {
            "tracking.nominal_meas_var must be positive".into()
        })?;
        check((0.0..=1.0).contains(&t.gate.decay), || {
            "tracking.decay must lie in [0, 1]".into()
        })?;
        finite_nonneg(t.gate.alpha_t, "tracking.alpha_t")?;
        finite_nonneg(t.gate.alpha_theta, "tracking.alpha_theta")?;
        finite_nonneg(t.cov_scale.c_t, "tracking.c_t")?;
        finite_nonneg(t.cov_scale.c_theta, "tracking.c_theta")?;
        check(
            t.cov_scale.sigma_t0 > 0.0 && t.cov_scale.sigma_theta0 > 0.0,
            || "tracking.sigma_t0 and tracking.sigma_theta0 must be positive".into(),
        )?;

        check(self.evaluation.d_match_m > 0.0, || {
            "evaluation.d_match_m must be positive".into()
        })?;
        check(self.evaluation.window_s > 0.0, || {
            "evaluation.window_s must be positive".into()
        })?;

        self.comm_graph()?;
        Ok(())
    }

    fn check_path(&self, p: &WaypointPath, who: &str) -> Result<()> {
        check(!p.waypoints.is_empty(), || {
            format!("{who}: waypoint list is empty")
        })?;
        check(p.speed_mps.is_finite() && p.speed_mps >= 0.0, || {
            format!("{who}: speed must be non-negative")
        })?;
        for w in &p.waypoints {
            check(self.arena.contains(Point2::new(w[0], w[1])), || {
                format!(
                    "{who}: waypoint ({}, {}) lies outside the arena",
                    w[0], w[1]
                )
            })?;
        }
        Ok(())
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
