//! Frame realignment between pairs of robots.
//!
//! Two sources of correspondences are supported: local maps of static
//! landmarks (associated with ICP and weighted by detection recency) and
//! time-matched detections of already-associated dynamic objects (weighted
//! by their consistency with the tracked state). Both feed a weighted
//! closed-form rigid registration.

use crate::error::{Error, Result};
use crate::geometry::{transform_error, transform_point, NoisyTransform, Point2, Pose2, PoseCov};
use nalgebra::{Matrix2, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkEntry {
    pub position: Point2,
    pub last_seen: u64,
}

/// A robot's local map of recently observed static landmarks, expressed in
/// the owner's local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkMap {
    pub owner: usize,
    pub stamp: u64,
    pub entries: Vec<LandmarkEntry>,
}

impl LandmarkMap {
    pub fn new(owner: usize) -> Self {
        Self {
            owner,
            stamp: 0,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Merges a detection into the map. The nearest entry within
    /// `merge_radius` is averaged with the detection and refreshed;
    /// otherwise a new entry is added.
    pub fn observe(&mut self, p: Point2, frame: u64, merge_radius: f64) {
        self.stamp = self.stamp.max(frame);
        let nearest = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.position.distance(p)))
            .filter(|&(_, d)| d <= merge_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        match nearest {
            Some(i) => {
                let e = &mut self.entries[i];
                e.position = Point2::new(0.5 * (e.position.x + p.x), 0.5 * (e.position.y + p.y));
                e.last_seen = e.last_seen.max(frame);
                self.coalesce(i, merge_radius);
            }
            None => self.entries.push(LandmarkEntry {
                position: p,
                last_seen: frame,
            }),
        }
    }

    // An averaged entry can drift into the merge radius of a neighbor.
    fn coalesce(&mut self, mut i: usize, merge_radius: f64) {
        loop {
            let pi = self.entries[i].position;
            let other = self
                .entries
                .iter()
                .enumerate()
                .filter(|&(j, e)| j != i && e.position.distance(pi) <= merge_radius)
                .min_by(|a, b| {
                    a.1.position
                        .distance(pi)
                        .total_cmp(&b.1.position.distance(pi))
                })
                .map(|(j, _)| j);
            let Some(j) = other else { break };
            let ej = self.entries.remove(j);
            if j < i {
                i -= 1;
            }
            let e = &mut self.entries[i];
            e.position = Point2::new(
                0.5 * (e.position.x + ej.position.x),
                0.5 * (e.position.y + ej.position.y),
            );
            e.last_seen = e.last_seen.max(ej.last_seen);
        }
    }

    /// Drops entries not seen within `horizon` frames of `frame`.
    pub fn prune(&mut self, frame: u64, horizon: u64) {
        self.entries
            .retain(|e| frame.saturating_sub(e.last_seen) <= horizon);
    }

    /// Line-oriented text record: `owner stamp` on the first line, then one
    /// `x y last_seen` triple per line.
    pub fn to_record(&self) -> String {
        let mut s = format!("{} {}\n", self.owner, self.stamp);
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {}", e.position.x, e.position.y, e.last_seen);
        }
        s
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::log("landmark map", reason);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty record"))?;
        let mut h = header.split_whitespace();
        let owner = h
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing owner id"))?;
        let stamp = h
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing stamp"))?;
        let mut entries = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("expected `x y last_seen`"));
            }
            let x: f64 = f[0].parse().map_err(|_| bad("bad x"))?;
            let y: f64 = f[1].parse().map_err(|_| bad("bad y"))?;
            let last_seen: u64 = f[2].parse().map_err(|_| bad("bad last_seen"))?;
            if last_seen > stamp {
                return Err(bad("last_seen exceeds stamp"));
            }
            entries.push(LandmarkEntry {
                position: Point2::new(x, y),
                last_seen,
            });
        }
        Ok(Self {
            owner,
            stamp,
            entries,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPair {
    pub a: Point2,
    pub b: Point2,
    pub w: f64,
}

pub type WeightedPairs = Vec<WeightedPair>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMethod {
    Static,
    Dynamic,
}

impl AlignMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AlignMethod::Static => "static",
            AlignMethod::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Correction {
    pub trans_m: f64,
    pub rot_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub transform: NoisyTransform,
    pub correction: Correction,
    pub pair_count: usize,
    pub method: AlignMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpParams {
    pub max_iter: usize,
    pub tol_m: f64,
    pub reject_radius_m: f64,
    /// Fewer final correspondences than this fail the registration.
    pub min_pairs: usize,
    /// Registrations whose RMS residual exceeds this are rejected (m).
    pub max_rms_m: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iter: 20,
            tol_m: 1e-4,
            reject_radius_m: 1.0,
            min_pairs: 3,
            max_rms_m: 0.3,
        }
    }
}

/// Linear scale from alignment jumps to alignment variance, with floors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CovScale {
    pub c_t: f64,
    pub c_theta: f64,
    pub sigma_t0: f64,
    pub sigma_theta0: f64,
}

impl Default for CovScale {
    fn default() -> Self {
        Self {
            c_t: 1.0,
            c_theta: 1.0,
            sigma_t0: 0.05,
            sigma_theta0: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignParams {
    pub icp: IcpParams,
    pub cov_scale: CovScale,
    pub w_max: f64,
    pub eps_d: f64,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self {
            icp: IcpParams::default(),
            cov_scale: CovScale::default(),
            w_max: 1e4,
            eps_d: 1e-6,
        }
    }
}

/// Weighted least-squares rigid registration: finds `T` minimizing
/// `Σ w ‖T·a − b‖²` from weighted centroids and the SVD of the weighted
/// cross-covariance. Reflections are corrected so `det R = +1`.
pub fn arun_weighted(pairs: &[WeightedPair]) -> Result<Pose2> {
    if pairs.iter().any(|p| !(p.w >= 0.0) || !p.w.is_finite()) {
        return Err(Error::DegenerateInput(
            "weights must be finite and non-negative".into(),
        ));
    }
    let active: Vec<&WeightedPair> = pairs.iter().filter(|p| p.w > 0.0).collect();
    if active.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "{} positively weighted pairs, need at least 2",
            active.len()
        )));
    }
    let wsum: f64 = active.iter().map(|p| p.w).sum();
    let (ca, cb) = active
        .iter()
        .fold((Vector2::zeros(), Vector2::zeros()), |(ca, cb), p| {
            (ca + p.a.to_vector() * p.w, cb + p.b.to_vector() * p.w)
        });
    let (ca, cb) = (ca / wsum, cb / wsum);

    let mut h = Matrix2::zeros();
    let mut spread = 0.0;
    for p in &active {
        let da = p.a.to_vector() - ca;
        let db = p.b.to_vector() - cb;
        h += p.w * da * db.transpose();
        spread += p.w * da.norm_squared();
    }
    let scale = active
        .iter()
        .map(|p| p.a.to_vector().norm())
        .fold(1.0, f64::max);
    if spread / wsum <= (1e-12 * scale).powi(2) {
        return Err(Error::DegenerateInput(
            "source points are coincident".into(),
        ));
    }

    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateInput("SVD failed".into())),
    };
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix2::new(1.0, 0.0, 0.0, if d == 0.0 { 1.0 } else { d });
    let r = v * fix * u.transpose();
    let theta = r[(1, 0)].atan2(r[(0, 0)]);
    let t = cb - r * ca;
    Ok(Pose2::new(t[0], t[1], theta))
}

/// Recency weight for a landmark pair: `1 / ((ℓi + 1)(ℓj + 1))`, where ℓ is
/// the number of frames since each landmark was last detected.
pub fn recency_weight(frames_i: u64, frames_j: u64) -> f64 {
    1.0 / ((frames_i as f64 + 1.0) * (frames_j as f64 + 1.0))
}

/// Diagnostic record of an ICP run.
#[derive(Debug, Clone)]
pub struct IcpOutcome {
    pub pairs: WeightedPairs,
    pub transform: Pose2,
    pub iterations: usize,
    /// Sum of squared correspondence distances at each association step.
    pub objective: Vec<f64>,
}

fn associate(
    map_i: &LandmarkMap,
    map_j: &LandmarkMap,
    t: &Pose2,
    reject: f64,
) -> Vec<(usize, usize, f64)> {
    // nearest neighbor in map_j for every transformed map_i entry, one-to-one
    let mut best: Vec<Option<(usize, f64)>> = vec![None; map_j.entries.len()];
    for (ii, ei) in map_i.entries.iter().enumerate() {
        let p = transform_point(t, ei.position);
        let nn = map_j
            .entries
            .iter()
            .enumerate()
            .map(|(jj, ej)| (jj, ej.position.distance(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((jj, d)) = nn {
            if d <= reject && best[jj].is_none_or(|(_, bd)| d < bd) {
                best[jj] = Some((ii, d));
            }
        }
    }
    let mut out: Vec<(usize, usize, f64)> = best
        .iter()
        .enumerate()
        .filter_map(|(jj, b)| b.map(|(ii, d)| (ii, jj, d)))
        .collect();
    out.sort_by_key(|&(ii, jj, _)| (ii, jj));
    out
}

/// Runs ICP from `initial` and returns the final correspondences with
/// recency weights, together with the per-iteration objective.
pub fn icp_trace(
    map_i: &LandmarkMap,
    map_j: &LandmarkMap,
    initial: &Pose2,
    params: &IcpParams,
    frame: u64,
) -> Result<IcpOutcome> {
    if map_i.is_empty() || map_j.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    let mut t = *initial;
    let mut objective = Vec::new();
    let mut iterations = 0;
    let mut corr;
    loop {
        iterations += 1;
        corr = associate(map_i, map_j, &t, params.reject_radius_m);
        objective.push(corr.iter().map(|&(_, _, d)| d * d).sum());
        if corr.len() < 2 {
            break;
        }
        let pairs: Vec<WeightedPair> = corr
            .iter()
            .map(|&(ii, jj, _)| WeightedPair {
                a: map_i.entries[ii].position,
                b: map_j.entries[jj].position,
                w: 1.0,
            })
            .collect();
        let next = match arun_weighted(&pairs) {
            Ok(p) => p,
            Err(_) => break,
        };
        let (dt, dh) = transform_error(&t, &next);
        t = next;
        if (dt < params.tol_m && dh.to_radians() < params.tol_m) || iterations >= params.max_iter {
            corr = associate(map_i, map_j, &t, params.reject_radius_m);
            break;
        }
    }
    if corr.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    let pairs = corr
        .iter()
        .map(|&(ii, jj, _)| {
            let ei = &map_i.entries[ii];
            let ej = &map_j.entries[jj];
            WeightedPair {
                a: ei.position,
                b: ej.position,
                w: recency_weight(
                    frame.saturating_sub(ei.last_seen),
                    frame.saturating_sub(ej.last_seen),
                ),
            }
        })
        .collect();
    Ok(IcpOutcome {
        pairs,
        transform: t,
        iterations,
        objective,
    })
}

/// ICP association of two landmark maps, seeded with `initial`. Pairs map
/// `map_i` positions (`a`) onto `map_j` positions (`b`).
pub fn icp_associate(
    map_i: &LandmarkMap,
    map_j: &LandmarkMap,
    initial: &Pose2,
    params: &IcpParams,
) -> Result<WeightedPairs> {
    let frame = map_i.stamp.max(map_j.stamp);
    icp_trace(map_i, map_j, initial, params, frame).map(|o| o.pairs)
}

/// `diag((c_t·Δt + σ_t0)², (c_t·Δt + σ_t0)², (c_θ·Δθ + σ_θ0)²)` from the jump
/// between consecutive alignment estimates.
pub fn alignment_covariance(current: &Pose2, previous: &Pose2, scale: &CovScale) -> PoseCov {
    let (dt, dh_deg) = transform_error(current, previous);
    let st = scale.c_t * dt + scale.sigma_t0;
    let sh = scale.c_theta * dh_deg.to_radians() + scale.sigma_theta0;
    PoseCov::from_diagonal(&Vector3::new(st * st, st * st, sh * sh))
}

/// Static-landmark realignment of `map_i` onto `map_j`, starting from the
/// previous estimate of the i→j transform.
pub fn align_static(
    map_i: &LandmarkMap,
    map_j: &LandmarkMap,
    prev: &NoisyTransform,
    frame: u64,
    params: &AlignParams,
) -> Result<AlignmentResult> {
    let outcome = icp_trace(map_i, map_j, &prev.pose, &params.icp, frame)?;
    if outcome.pairs.len() < params.icp.min_pairs {
        return Err(Error::DegenerateInput(format!(
            "{} landmark correspondences, need {}",
            outcome.pairs.len(),
            params.icp.min_pairs
        )));
    }
    let pose = arun_weighted(&outcome.pairs)?;
    let rms = (outcome
        .pairs
        .iter()
        .map(|p| transform_point(&pose, p.a).distance(p.b).powi(2))
        .sum::<f64>()
        / outcome.pairs.len() as f64)
        .sqrt();
    if rms > params.icp.max_rms_m {
        return Err(Error::DegenerateInput(format!(
            "registration residual {rms:.3} m exceeds {} m",
            params.icp.max_rms_m
        )));
    }
    let (trans_m, rot_deg) = transform_error(&pose, &prev.pose);
    Ok(AlignmentResult {
        transform: NoisyTransform::new(
            pose,
            alignment_covariance(&pose, &prev.pose, &params.cov_scale),
            frame,
        ),
        correction: Correction {
            trans_m,
            rot_rad: rot_deg.to_radians(),
        },
        pair_count: outcome.pairs.len(),
        method: AlignMethod::Static,
    })
}

/// Weight of a co-detection pair by agreement with the tracked state:
/// `1 / ((Hx − z_i)ᵀ(Hx − z̃_j))`, zero when the inner product is at or below
/// `eps_d` and clamped to `w_max`.
pub fn consistency_weight(
    state: &Vector4<f64>,
    z_i: Point2,
    z_j: Point2,
    w_max: f64,
    eps_d: f64,
) -> f64 {
    let hx = Vector2::new(state[0], state[1]);
    let d = (hx - z_i.to_vector()).dot(&(hx - z_j.to_vector()));
    if !d.is_finite() || d <= eps_d {
        return 0.0;
    }
    (1.0 / d).min(w_max)
}

/// A time-matched pair of detections of the same tracked object: robot i's
/// own measurement, the neighbor's measurement already expressed in robot
/// i's frame, and robot i's predicted track state at that time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoDetection {
    pub frame: u64,
    pub state: Vector4<f64>,
    pub local: Point2,
    pub remote: Point2,
}

/// Dynamic-object realignment: registers neighbor detections onto the
/// local ones and composes the resulting correction onto `prev` (the
/// transform that expressed neighbor detections in the local frame).
pub fn align_dynamic(
    pairs: &[CoDetection],
    prev: &NoisyTransform,
    frame: u64,
    params: &AlignParams,
) -> Result<AlignmentResult> {
    let weighted: Vec<WeightedPair> = pairs
        .iter()
        .map(|c| WeightedPair {
            a: c.remote,
            b: c.local,
            w: consistency_weight(&c.state, c.local, c.remote, params.w_max, params.eps_d),
        })
        .collect();
    let realign = arun_weighted(&weighted)?;
    let pose = realign.compose(&prev.pose);
    let (trans_m, rot_deg) = transform_error(&Pose2::IDENTITY, &realign);
    Ok(AlignmentResult {
        transform: NoisyTransform::new(
            pose,
            alignment_covariance(&pose, &prev.pose, &params.cov_scale),
            frame,
        ),
        correction: Correction {
            trans_m,
            rot_rad: rot_deg.to_radians(),
        },
        pair_count: weighted.iter().filter(|p| p.w > 0.0).count(),
        method: AlignMethod::Dynamic,
    })
}
