//! Per-robot multi-object tracking: constant-velocity prediction, gated
//! global-nearest-neighbor association, Kalman-Consensus fusion in
//! information form, and track lifecycle management.

mod assignment;
mod bank;
mod gate;
mod kcf;
mod model;
mod node;

pub use assignment::{hungarian, Assignment, FORBIDDEN};
pub use bank::{manage_tracks, TrackBank, TrackParams};
pub use gate::{adapt_gate, GateParams, GateState};
pub use kcf::{kcf_update, to_information, Information};
pub use model::{mahalanobis, predict, MotionModel};
pub use node::{gnn_associate, Association, CoDetectionEvent, FuseReport, Tracker};

use crate::geometry::{Point2, PointCov};
use nalgebra::{Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Globally unique track identity: the robot that created the track and
/// that robot's creation counter. Ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackId {
    pub robot: usize,
    pub seq: u32,
}

impl TrackId {
    pub fn new(robot: usize, seq: u32) -> Self {
        Self { robot, seq }
    }
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.robot, self.seq)
    }
}

impl FromStr for TrackId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (r, q) = s
            .split_once(':')
            .ok_or_else(|| format!("track id `{s}` is not `robot:seq`"))?;
        Ok(Self {
            robot: r
                .parse()
                .map_err(|_| format!("bad robot in track id `{s}`"))?,
            seq: q
                .parse()
                .map_err(|_| format!("bad sequence in track id `{s}`"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
}

impl TrackStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Confirmed => "confirmed",
        }
    }
}

impl FromStr for TrackStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tentative" => Ok(TrackStatus::Tentative),
            "confirmed" => Ok(TrackStatus::Confirmed),
            other => Err(format!("unknown track status `{other}`")),
        }
    }
}

/// A tracked object. `x` and `p` hold the prior for the next frame;
/// `estimate` keeps the most recent filtered state for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: TrackId,
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub estimate: Vector4<f64>,
    pub lifetime: u32,
    pub missed: u32,
    pub hits: u32,
    pub status: TrackStatus,
}

impl Track {
    pub fn new(id: TrackId, x: Vector4<f64>, p: Matrix4<f64>) -> Self {
        Self {
            id,
            x,
            p,
            estimate: x,
            lifetime: 0,
            missed: 0,
            hits: 0,
            status: TrackStatus::Tentative,
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x[0], self.x[1])
    }

    pub fn estimated_position(&self) -> Point2 {
        Point2::new(self.estimate[0], self.estimate[1])
    }

    pub fn is_confirmed(&self) -> bool {
        self.status == TrackStatus::Confirmed
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub pos: Point2,
    pub cov: PointCov,
    pub stamp: u64,
    pub source: usize,
}

/// Information-form share of one track, already expressed in the
/// recipient's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMessage {
    pub track_id: TrackId,
    pub prior: Vector4<f64>,
    pub u: Vector4<f64>,
    pub big_u: Matrix4<f64>,
    pub sender: usize,
    pub stamp: u64,
}

impl InfoMessage {
    pub fn has_measurement(&self) -> bool {
        self.big_u.iter().any(|v| *v != 0.0)
    }

    /// Recovers the position measurement and its covariance encoded in
    /// `(u, U)`, if any.
    pub fn measurement(&self) -> Option<(Point2, PointCov)> {
        if !self.has_measurement() {
            return None;
        }
        let info = self.big_u.fixed_view::<2, 2>(0, 0).into_owned();
        let cov = info.try_inverse()?;
        let z: Vector2<f64> = cov * self.u.fixed_rows::<2>(0);
        Some((Point2::from_vector(&z), cov))
    }
}
