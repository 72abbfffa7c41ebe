//! SE(2) pose algebra and first-order covariance propagation.
//!
//! Poses are parameterized as `(x, y, theta)` with the heading kept in
//! `(-pi, pi]`. Covariances over a pose use the same parameter order.
//! Point transforms and the Jacobians below are the planar
//! specialization of the Smith-Self-Cheeseman compounding operators.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// 3x3 covariance over `(x, y, theta)`.
pub type PoseCov = Matrix3<f64>;
/// 2x2 covariance over a planar point.
pub type PointCov = Matrix2<f64>;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self { x: v[0], y: v[1] }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A rigid transform in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn translation(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        rotation(self.theta)
    }

    /// Homogeneous 3x3 matrix form.
    pub fn to_matrix(&self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix3::new(c, -s, self.x, s, c, self.y, 0.0, 0.0, 1.0)
    }

    pub fn compose(&self, other: &Pose2) -> Pose2 {
        compose(self, other)
    }

    pub fn inverse(&self) -> Pose2 {
        inverse(self)
    }

    pub fn transform_point(&self, p: Point2) -> Point2 {
        transform_point(self, p)
    }
}

pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Derivative of the rotation matrix with respect to the heading.
fn rotation_derivative(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(-s, -c, c, -s)
}

/// Head-to-tail composition `a ⊕ b`.
pub fn compose(a: &Pose2, b: &Pose2) -> Pose2 {
    let (s, c) = a.theta.sin_cos();
    Pose2 {
        x: a.x + c * b.x - s * b.y,
        y: a.y + s * b.x + c * b.y,
        theta: normalize_angle(a.theta + b.theta),
    }
}

pub fn inverse(a: &Pose2) -> Pose2 {
    let (s, c) = a.theta.sin_cos();
    Pose2 {
        x: -(c * a.x + s * a.y),
        y: -(-s * a.x + c * a.y),
        theta: normalize_angle(-a.theta),
    }
}

pub fn transform_point(t: &Pose2, p: Point2) -> Point2 {
    let (s, c) = t.theta.sin_cos();
    Point2 {
        x: t.x + c * p.x - s * p.y,
        y: t.y + s * p.x + c * p.y,
    }
}

/// Jacobian of `T·p` with respect to the pose parameters `(x, y, theta)`.
pub fn point_jacobian(t: &Pose2, p: Point2) -> Matrix2x3<f64> {
    let d = rotation_derivative(t.theta) * p.to_vector();
    Matrix2x3::new(1.0, 0.0, d[0], 0.0, 1.0, d[1])
}

/// Jacobians of `a ⊕ b` with respect to `a` and to `b`.
pub fn compose_jacobians(a: &Pose2, b: &Pose2) -> (Matrix3<f64>, Matrix3<f64>) {
    let (s, c) = a.theta.sin_cos();
    let ja = Matrix3::new(
        1.0,
        0.0,
        -s * b.x - c * b.y,
        0.0,
        1.0,
        c * b.x - s * b.y,
        0.0,
        0.0,
        1.0,
    );
    let jb = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    (ja, jb)
}

/// Jacobian of `inverse(a)` with respect to `a`.
pub fn inverse_jacobian(a: &Pose2) -> Matrix3<f64> {
    let (s, c) = a.theta.sin_cos();
    // inverse = (-(c x + s y), s x - c y, -theta)
    Matrix3::new(
        -c,
        -s,
        s * a.x - c * a.y,
        s,
        -c,
        c * a.x + s * a.y,
        0.0,
        0.0,
        -1.0,
    )
}

pub fn symmetrize2(m: &Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize3(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix (symmetrized first).
pub fn min_eigenvalue2(m: &Matrix2<f64>) -> f64 {
    SymmetricEigen::new(symmetrize2(m)).eigenvalues.min()
}

pub fn min_eigenvalue3(m: &Matrix3<f64>) -> f64 {
    SymmetricEigen::new(symmetrize3(m)).eigenvalues.min()
}

/// Pushes a point measured in a robot's body frame into its local frame,
/// combining the pose uncertainty `sigma` with the sensor noise `r`.
pub fn propagate_into_local(
    pose: &Pose2,
    sigma: &PoseCov,
    z: Point2,
    r: &PointCov,
) -> (Point2, PointCov) {
    let f = point_jacobian(pose, z);
    let g = pose.rotation();
    let cov = f * sigma * f.transpose() + g * r * g.transpose();
    (transform_point(pose, z), symmetrize2(&cov))
}

/// An uncertain rigid transform, stamped with the frame it was estimated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyTransform {
    pub pose: Pose2,
    pub cov: PoseCov,
    pub stamp: u64,
}

impl NoisyTransform {
    pub fn new(pose: Pose2, cov: PoseCov, stamp: u64) -> Self {
        Self {
            pose,
            cov: symmetrize3(&cov),
            stamp,
        }
    }

    pub fn exact(pose: Pose2, stamp: u64) -> Self {
        Self::new(pose, PoseCov::zeros(), stamp)
    }

    /// Inverse transform with first-order covariance.
    pub fn inverse(&self) -> NoisyTransform {
        let j = inverse_jacobian(&self.pose);
        NoisyTransform {
            pose: self.pose.inverse(),
            cov: symmetrize3(&(j * self.cov * j.transpose())),
            stamp: self.stamp,
        }
    }

    pub fn without_covariance(&self) -> NoisyTransform {
        NoisyTransform::exact(self.pose, self.stamp)
    }
}

/// Tail-to-tail transfer of a local-frame measurement into a neighbor's
/// frame. The alignment covariance is marginalized through the point
/// Jacobian, so heading uncertainty grows with the lever arm of `z`.
pub fn propagate_into_neighbor(
    alignment: &NoisyTransform,
    z: Point2,
    r: &PointCov,
) -> (Point2, PointCov) {
    let j = alignment.pose.rotation();
    let f = point_jacobian(&alignment.pose, z);
    let cov = j * r * j.transpose() + f * alignment.cov * f.transpose();
    (transform_point(&alignment.pose, z), symmetrize2(&cov))
}

/// Translation (m) and absolute heading (deg) of `est⁻¹ ⊕ truth`.
pub fn transform_error(est: &Pose2, truth: &Pose2) -> (f64, f64) {
    let d = compose(&inverse(est), truth);
    (d.x.hypot(d.y), d.theta.abs().to_degrees())
}
