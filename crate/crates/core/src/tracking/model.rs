use super::{Measurement, Track};
use crate::error::{Error, Result};
use crate::geometry::{symmetrize2, PointCov};
use nalgebra::{Matrix2x4, Matrix4, Vector2};

/// Linear-Gaussian motion and measurement model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    pub dt: f64,
    pub a: Matrix4<f64>,
    pub h: Matrix2x4<f64>,
    pub q: Matrix4<f64>,
}

impl MotionModel {
    /// Constant-velocity model over state `[px, py, vx, vy]` with
    /// white-noise-acceleration process noise of intensity `q`.
    pub fn constant_velocity(dt: f64, q: f64) -> Self {
        let mut a = Matrix4::identity();
        a[(0, 2)] = dt;
        a[(1, 3)] = dt;
        let (d3, d2) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0);
        #[rustfmt::skip]
        let qm = Matrix4::new(
            d3, 0.0, d2, 0.0,
            0.0, d3, 0.0, d2,
            d2, 0.0, dt, 0.0,
            0.0, d2, 0.0, dt,
        ) * q;
        Self {
            dt,
            a,
            h: Self::position_extraction(),
            q: qm,
        }
    }

    pub fn new(dt: f64, a: Matrix4<f64>, q: Matrix4<f64>) -> Self {
        Self {
            dt,
            a,
            h: Self::position_extraction(),
            q,
        }
    }

    fn position_extraction() -> Matrix2x4<f64> {
        Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    }
}

pub fn predict(t: &Track, model: &MotionModel) -> Track {
    let mut out = t.clone();
    out.x = model.a * t.x;
    let p = model.a * t.p * model.a.transpose() + model.q;
    out.p = (p + p.transpose()) * 0.5;
    out.lifetime += 1;
    out
}

pub(crate) fn invert_innovation(s: &PointCov) -> Result<PointCov> {
    let s = symmetrize2(s);
    let eig = s.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= 1e12) {
        return Err(Error::SingularInnovation(cond));
    }
    s.try_inverse().ok_or(Error::SingularInnovation(cond))
}

pub(crate) fn mahalanobis_raw(r: Vector2<f64>, s: &PointCov) -> Result<f64> {
    let s_inv = invert_innovation(s)?;
    Ok((r.transpose() * s_inv * r)[(0, 0)])
}

/// Squared Mahalanobis distance of a measurement from a track's predicted
/// position under the innovation covariance `H P Hᵀ + R`.
pub fn mahalanobis(z: &Measurement, t: &Track, model: &MotionModel) -> Result<f64> {
    let r = z.pos.to_vector() - model.h * t.x;
    let s = model.h * t.p * model.h.transpose() + z.cov;
    mahalanobis_raw(r, &s)
}
