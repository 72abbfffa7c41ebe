use super::model::{mahalanobis_raw, predict};
use super::{InfoMessage, Measurement, MotionModel, Track, TrackId, TrackStatus};
use crate::geometry::{Point2, PointCov};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackParams {
    /// Associations needed before a tentative track is confirmed.
    pub n_confirm: u32,
    /// A track is deleted once its consecutive misses exceed this.
    pub n_miss_max: u32,
    /// Speed bound used for the initial velocity variance (m/s).
    pub v_max: f64,
    /// Bound on `(|neighbors| + 1) · λ_max` of the consensus gain.
    pub gain_cap: f64,
    /// Position variance assumed for shared priors that carry no
    /// measurement (m²).
    pub nominal_meas_var: f64,
    /// Merge confirmed local tracks that fall within the gate of each other.
    pub coalesce: bool,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            n_confirm: 3,
            n_miss_max: 10,
            v_max: 2.0,
            gain_cap: 1.0,
            nominal_meas_var: 0.0225,
            coalesce: true,
        }
    }
}

/// One robot's set of tracks plus the id aliases it has learned.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackBank {
    pub owner: usize,
    pub tracks: Vec<Track>,
    next_seq: u32,
    aliases: BTreeMap<TrackId, TrackId>,
}

impl TrackBank {
    pub fn new(owner: usize) -> Self {
        Self {
            owner,
            tracks: Vec::new(),
            next_seq: 0,
            aliases: BTreeMap::new(),
        }
    }

    /// Follows aliases to the id currently used for `id`.
    pub fn resolve(&self, id: TrackId) -> TrackId {
        let mut cur = id;
        while let Some(next) = self.aliases.get(&cur) {
            cur = *next;
        }
        cur
    }

    pub fn find(&self, id: TrackId) -> Option<usize> {
        let id = self.resolve(id);
        self.tracks.iter().position(|t| t.id == id)
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.is_confirmed())
    }

    fn initial_covariance(pos_cov: &PointCov, v_max: f64) -> Matrix4<f64> {
        let mut p = Matrix4::zeros();
        p.fixed_view_mut::<2, 2>(0, 0).copy_from(pos_cov);
        p[(2, 2)] = v_max * v_max;
        p[(3, 3)] = v_max * v_max;
        p
    }

    /// Starts a tentative track at a measurement with zero velocity. The
    /// returned track holds the state at the measurement time.
    pub fn spawn(&mut self, z: &Measurement, params: &TrackParams) -> usize {
        let id = TrackId::new(self.owner, self.next_seq);
        self.next_seq += 1;
        let x = Vector4::new(z.pos.x, z.pos.y, 0.0, 0.0);
        let mut t = Track::new(id, x, Self::initial_covariance(&z.cov, params.v_max));
        t.hits = 1;
        self.tracks.push(t);
        self.tracks.len() - 1
    }

    fn adopt(&mut self, msg: &InfoMessage, pos_cov: &PointCov, params: &TrackParams) -> usize {
        let mut t = Track::new(
            msg.track_id,
            msg.prior,
            Self::initial_covariance(pos_cov, params.v_max),
        );
        t.status = TrackStatus::Confirmed;
        // a revived id must not keep pointing at its old survivor
        self.aliases.remove(&msg.track_id);
        self.tracks.push(t);
        self.tracks.len() - 1
    }

    fn unify(&mut self, idx: usize, other: TrackId) {
        let own = self.tracks[idx].id;
        if other < own {
            self.aliases.remove(&other);
            self.aliases.insert(own, other);
            self.tracks[idx].id = other;
        } else if other > own {
            self.aliases.insert(other, own);
        }
    }

    /// Routes incoming messages to local tracks. Known ids are routed
    /// directly. An unknown id carrying a measurement is matched by gated
    /// nearest neighbor and the pair is unified under the smaller id;
    /// unmatched ones are adopted as new confirmed tracks. Returns, per
    /// message, the index of the local track it updates (adopted tracks and
    /// dropped messages yield `None`).
    pub fn reconcile(
        &mut self,
        inbox: &[InfoMessage],
        tau: f64,
        model: &MotionModel,
        params: &TrackParams,
    ) -> Vec<Option<usize>> {
        let existing = self.tracks.len();
        let mut taken: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut routes = Vec::with_capacity(inbox.len());
        let gated = |t: &Track, z: &Point2, cov: &PointCov| {
            let s = model.h * t.p * model.h.transpose() + cov;
            mahalanobis_raw(z.to_vector() - model.h * t.x, &s)
                .ok()
                .filter(|d| *d <= tau)
        };
        for msg in inbox {
            if let Some(idx) = self.find(msg.track_id) {
                // An inferred alias that no longer fits is forgotten.
                let stale = self.tracks[idx].id != msg.track_id
                    && idx < existing
                    && msg
                        .measurement()
                        .is_some_and(|(z, cov)| gated(&self.tracks[idx], &z, &cov).is_none());
                if !stale {
                    routes.push((idx < existing).then_some(idx));
                    taken.insert((msg.sender, idx));
                    continue;
                }
                self.aliases.remove(&msg.track_id);
            }
            let Some((z, cov)) = msg.measurement() else {
                routes.push(None);
                continue;
            };
            let best = (0..existing)
                .filter(|idx| !taken.contains(&(msg.sender, *idx)))
                .filter_map(|idx| gated(&self.tracks[idx], &z, &cov).map(|d| (idx, d)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((idx, _)) => {
                    self.unify(idx, msg.track_id);
                    taken.insert((msg.sender, idx));
                    routes.push(Some(idx));
                }
                None => {
                    self.adopt(msg, &cov, params);
                    routes.push(None);
                }
            }
        }
        routes
    }

    /// Merges confirmed tracks whose full states (position and velocity)
    /// agree within the gate. The survivor takes the smaller id and the
    /// better-determined state.
    pub fn coalesce(&mut self, tau: f64) {
        loop {
            let mut pair = None;
            'outer: for a in 0..self.tracks.len() {
                for b in a + 1..self.tracks.len() {
                    let (ta, tb) = (&self.tracks[a], &self.tracks[b]);
                    if !(ta.is_confirmed() && tb.is_confirmed()) {
                        continue;
                    }
                    if same_object(ta, tb, tau) {
                        pair = Some((a, b));
                        break 'outer;
                    }
                }
            }
            let Some((a, b)) = pair else { break };
            let tb = self.tracks.remove(b);
            let ta = &mut self.tracks[a];
            let keep_id = ta.id.min(tb.id);
            let drop_id = ta.id.max(tb.id);
            if tb.p.trace() < ta.p.trace() {
                let (hits, lifetime) = (ta.hits.max(tb.hits), ta.lifetime.max(tb.lifetime));
                *ta = tb.clone();
                ta.hits = hits;
                ta.lifetime = lifetime;
            }
            ta.id = keep_id;
            ta.missed = ta.missed.min(tb.missed);
            self.aliases.remove(&keep_id);
            self.aliases.insert(drop_id, keep_id);
        }
    }

    pub fn sort(&mut self) {
        self.tracks.sort_by_key(|t| t.id);
    }
}

// Gate on the 4-D state difference, scaled from the 2-D position gate so
// that crossing objects with different velocities stay apart.
fn same_object(a: &Track, b: &Track, tau: f64) -> bool {
    let s = a.p + b.p;
    let r = a.x - b.x;
    s.cholesky()
        .is_some_and(|c| r.dot(&c.solve(&r)) <= 2.0 * tau)
}

/// End-of-frame lifecycle: spawns tentative tracks from unmatched local
/// measurements (predicted to the next frame), confirms tracks with enough
/// associations, and deletes tracks that missed too many frames.
pub fn manage_tracks(
    bank: &mut TrackBank,
    unmatched: &[Measurement],
    model: &MotionModel,
    params: &TrackParams,
) {
    for z in unmatched {
        let idx = bank.spawn(z, params);
        bank.tracks[idx] = predict(&bank.tracks[idx], model);
    }
    for t in &mut bank.tracks {
        if t.status == TrackStatus::Tentative && t.hits >= params.n_confirm {
            t.status = TrackStatus::Confirmed;
        }
    }
    bank.tracks.retain(|t| t.missed <= params.n_miss_max);
}
