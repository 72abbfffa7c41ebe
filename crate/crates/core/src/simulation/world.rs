use super::config::{RobotConfig, Trajectory, WaypointPath};
use crate::geometry::{Point2, Pose2};

/// Position and heading along a closed waypoint loop after `t` seconds.
pub fn walk(path: &WaypointPath, t: f64) -> (Point2, f64) {
    let pts: Vec<Point2> = path
        .waypoints
        .iter()
        .map(|w| Point2::new(w[0], w[1]))
        .collect();
    let first = pts[0];
    if pts.len() == 1 || path.speed_mps <= 0.0 {
        let heading = pts
            .get(1)
            .map_or(0.0, |p| (p.y - first.y).atan2(p.x - first.x));
        return (first, heading);
    }
    let segments: Vec<(Point2, Point2, f64)> = (0..pts.len())
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            (a, b, a.distance(b))
        })
        .collect();
    let total: f64 = segments.iter().map(|s| s.2).sum();
    if total <= 0.0 {
        return (first, 0.0);
    }
    let mut s = (path.speed_mps * t).rem_euclid(total);
    for &(a, b, len) in &segments {
        if len > 0.0 && s <= len {
            let f = s / len;
            let p = Point2::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y));
            return (p, (b.y - a.y).atan2(b.x - a.x));
        }
        s -= len;
    }
    let (a, b, _) = segments[segments.len() - 1];
    (b, (b.y - a.y).atan2(b.x - a.x))
}

pub fn pedestrian_position(path: &WaypointPath, t: f64) -> Point2 {
    walk(path, t).0
}

/// True world pose of a robot at time `t`.
pub fn robot_pose(robot: &RobotConfig, t: f64) -> Pose2 {
    match &robot.trajectory {
        Trajectory::Static { pose } => Pose2::new(pose.x, pose.y, pose.theta),
        Trajectory::Circular {
            center,
            radius_m,
            angular_rate_rps,
            phase_rad,
        } => {
            let phi = phase_rad + angular_rate_rps * t;
            let turn = if *angular_rate_rps < 0.0 { -1.0 } else { 1.0 };
            Pose2::new(
                center[0] + radius_m * phi.cos(),
                center[1] + radius_m * phi.sin(),
                phi + turn * std::f64::consts::FRAC_PI_2,
            )
        }
        Trajectory::Waypoints(path) => {
            let (p, h) = walk(path, t);
            Pose2::new(p.x, p.y, h)
        }
    }
}
