use super::config::{DetectionNoise, Fov, LandmarkNoise, OdomNoise, RealignMode};
use crate::geometry::{compose_jacobians, propagate_into_local, Point2, PointCov, Pose2, PoseCov};
use crate::registration::AlignMethod;
use crate::tracking::Measurement;
use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

/// Heading error injected per meter of translation error.
pub const HEADING_PER_METER_DEG: f64 = 8.12;

/// A noisy body-frame motion increment and its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdomStep {
    pub increment: Pose2,
    pub cov: PoseCov,
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let n: f64 = StandardNormal.sample(rng);
    sigma * n
}

/// Corrupts a true body-frame increment. Translation noise applies only
/// while translating; heading noise applies while moving at all.
pub fn step_odometry<R: Rng + ?Sized>(
    true_inc: &Pose2,
    noise: &OdomNoise,
    rng: &mut R,
) -> OdomStep {
    let translating = true_inc.x.hypot(true_inc.y) > 1e-12;
    let moving = translating || true_inc.theta.abs() > 1e-12;
    let sv = if translating { noise.sigma_v } else { 0.0 };
    let sw = if moving { noise.sigma_omega } else { 0.0 };
    let (nx, ny, nw) = if moving {
        (gauss(rng, sv), gauss(rng, sv), gauss(rng, sw))
    } else {
        (0.0, 0.0, 0.0)
    };
    OdomStep {
        increment: Pose2::new(true_inc.x + nx, true_inc.y + ny, true_inc.theta + nw),
        cov: PoseCov::from_diagonal(&Vector3::new(sv * sv, sv * sv, sw * sw)),
    }
}

/// Chains an odometry step onto the pose estimate with first-order
/// covariance propagation.
pub fn integrate(est: &Pose2, sigma: &PoseCov, step: &OdomStep) -> (Pose2, PoseCov) {
    let (ja, jb) = compose_jacobians(est, &step.increment);
    let cov = ja * sigma * ja.transpose() + jb * step.cov * jb.transpose();
    (est.compose(&step.increment), (cov + cov.transpose()) * 0.5)
}

/// Body-frame coordinates of `p` if it lies inside the field of view.
pub fn in_fov(pose: &Pose2, fov: &Fov, p: Point2) -> Option<Point2> {
    let b = pose.inverse().transform_point(p);
    let r = b.norm();
    (r <= fov.range_m && b.y.atan2(b.x).abs() <= fov.half_angle_rad).then_some(b)
}

/// What one robot knows and where it truly is for one frame.
#[derive(Debug, Clone, Copy)]
pub struct RobotView<'a> {
    pub id: usize,
    pub true_pose: Pose2,
    pub est_pose: Pose2,
    pub sigma: PoseCov,
    pub fov: &'a Fov,
}

/// Pedestrian detections in the robot's local frame, followed by clutter.
pub fn detect_pedestrians<R: Rng + ?Sized>(
    view: &RobotView,
    pedestrians: &[Point2],
    noise: &DetectionNoise,
    use_pose_cov: bool,
    frame: u64,
    rng: &mut R,
) -> Vec<Measurement> {
    let rep = noise.reported();
    let r = PointCov::identity() * (rep * rep);
    let sigma = if use_pose_cov {
        view.sigma
    } else {
        PoseCov::zeros()
    };
    let to_local = |b: Point2| {
        let (pos, cov) = propagate_into_local(&view.est_pose, &sigma, b, &r);
        Measurement {
            pos,
            cov,
            stamp: frame,
            source: view.id,
        }
    };
    let mut out = Vec::new();
    for p in pedestrians {
        let Some(b) = in_fov(&view.true_pose, view.fov, *p) else {
            continue;
        };
        if !rng.random_bool(noise.p_detect) {
            continue;
        }
        let noisy = Point2::new(
            b.x + gauss(rng, noise.sigma_m),
            b.y + gauss(rng, noise.sigma_m),
        );
        out.push(to_local(noisy));
    }
    if noise.clutter_rate > 0.0 {
        let n: f64 = Poisson::new(noise.clutter_rate)
            .expect("clutter rate is positive")
            .sample(rng);
        for _ in 0..n as usize {
            let rad = view.fov.range_m * rng.random::<f64>().sqrt();
            let ang = view.fov.half_angle_rad * (2.0 * rng.random::<f64>() - 1.0);
            out.push(to_local(Point2::new(rad * ang.cos(), rad * ang.sin())));
        }
    }
    out
}

/// Landmark sightings in the robot's local frame.
pub fn detect_landmarks<R: Rng + ?Sized>(
    view: &RobotView,
    landmarks: &[Point2],
    noise: &LandmarkNoise,
    rng: &mut R,
) -> Vec<Point2> {
    let mut out = Vec::new();
    for l in landmarks {
        let Some(b) = in_fov(&view.true_pose, view.fov, *l) else {
            continue;
        };
        if !rng.random_bool(noise.p_detect) {
            continue;
        }
        let noisy = Point2::new(
            b.x + gauss(rng, noise.sigma_m),
            b.y + gauss(rng, noise.sigma_m),
        );
        out.push(view.est_pose.transform_point(noisy));
    }
    out
}

/// Random frame-alignment error: translation magnitude `|N(0, σ_t)|` in a
/// uniform direction and heading `N(0, σ_θ)` with `σ_θ = 8.12°/m · σ_t`.
pub fn inject_alignment_error<R: Rng + ?Sized>(sigma_t: f64, rng: &mut R) -> Pose2 {
    if sigma_t <= 0.0 {
        return Pose2::IDENTITY;
    }
    let sigma_theta = (HEADING_PER_METER_DEG * sigma_t).to_radians();
    let mag = gauss(rng, sigma_t).abs();
    let dir = rng.random::<f64>() * std::f64::consts::TAU;
    let theta = Normal::new(0.0, sigma_theta)
        .expect("heading sigma is finite")
        .sample(rng);
    Pose2::new(mag * dir.cos(), mag * dir.sin(), theta)
}

/// Which realignment to run for one robot pair this frame. `eta` counts
/// the co-detections in the pair's window.
pub fn select_realign_mode(
    eta: usize,
    tau_eta: usize,
    mode: RealignMode,
    map_available: bool,
) -> Option<AlignMethod> {
    match mode {
        RealignMode::Off => None,
        RealignMode::Static => map_available.then_some(AlignMethod::Static),
        RealignMode::Dynamic => Some(AlignMethod::Dynamic),
        RealignMode::Auto if eta >= tau_eta => Some(AlignMethod::Dynamic),
        RealignMode::Auto => map_available.then_some(AlignMethod::Static),
    }
}
