use super::{MotionModel, Track};
use crate::error::{Error, Result};
use crate::geometry::{Point2, PointCov};
use nalgebra::{Matrix4, Vector4};

/// Summed information-form contributions `(y, Y)` for one track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Information {
    pub y: Vector4<f64>,
    pub big_y: Matrix4<f64>,
}

impl Default for Information {
    fn default() -> Self {
        Self {
            y: Vector4::zeros(),
            big_y: Matrix4::zeros(),
        }
    }
}

impl Information {
    pub fn add(&mut self, u: &Vector4<f64>, big_u: &Matrix4<f64>) {
        self.y += u;
        self.big_y += big_u;
    }

    pub fn is_empty(&self) -> bool {
        self.big_y.iter().all(|v| *v == 0.0)
    }
}

/// `u = Hᵀ R⁻¹ z`, `U = Hᵀ R⁻¹ H`.
pub fn to_information(
    z: Point2,
    r: &PointCov,
    model: &MotionModel,
) -> Result<(Vector4<f64>, Matrix4<f64>)> {
    let r_inv = r
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::SingularCovariance)?;
    let ht_rinv = model.h.transpose() * r_inv;
    let big_u = ht_rinv * model.h;
    Ok((ht_rinv * z.to_vector(), (big_u + big_u.transpose()) * 0.5))
}

fn max_eigenvalue(m: &Matrix4<f64>) -> f64 {
    ((m + m.transpose()) * 0.5).symmetric_eigenvalues().max()
}

/// Kalman-Consensus update of one track followed by prediction.
///
/// `info` aggregates the local and neighbor contributions; `neighbor_priors`
/// are the neighbors' priors for this track in the local frame. The
/// consensus gain `M / (1 + ‖M‖_F)` is scaled down, if needed, so that
/// `(|neighbors| + 1) · λ_max` does not exceed `gain_cap`; pass
/// `f64::INFINITY` for the unscaled gain.
pub fn kcf_update(
    t: &Track,
    info: &Information,
    neighbor_priors: &[Vector4<f64>],
    model: &MotionModel,
    gain_cap: f64,
) -> Result<Track> {
    let p_inv =
        t.p.cholesky()
            .map(|c| c.inverse())
            .or_else(|| t.p.try_inverse())
            .ok_or(Error::SingularGain)?;
    let gain_info = p_inv + info.big_y;
    let m = gain_info
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| gain_info.try_inverse())
        .ok_or(Error::SingularGain)?;
    let m = (m + m.transpose()) * 0.5;

    let prior = t.x;
    let mut x = prior + m * (info.y - info.big_y * prior);
    if !neighbor_priors.is_empty() {
        let mut gamma = m / (1.0 + m.norm());
        let n = (neighbor_priors.len() + 1) as f64;
        let lam = max_eigenvalue(&gamma);
        if gain_cap.is_finite() && n * lam > gain_cap {
            gamma *= gain_cap / (n * lam);
        }
        let disagreement: Vector4<f64> = neighbor_priors.iter().map(|xj| xj - prior).sum();
        x += gamma * disagreement;
    }

    let mut out = t.clone();
    out.estimate = x;
    out.x = model.a * x;
    let p = model.a * m * model.a.transpose() + model.q;
    out.p = (p + p.transpose()) * 0.5;
    out.lifetime += 1;
    if info.is_empty() {
        out.missed += 1;
    } else {
        out.missed = 0;
        out.hits += 1;
    }
    Ok(out)
}
