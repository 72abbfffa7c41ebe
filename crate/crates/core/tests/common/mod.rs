//! Independent reference implementations used to cross-check the library.

#![allow(dead_code)]

use cotrack_core::geometry::Point2;
use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Exhaustive assignment: the maximum number of allowed pairs, then the
/// least total cost. Returns (pair count, cost).
pub fn brute_assignment(cost: &[Vec<f64>], forbidden: f64) -> (usize, f64) {
    fn go(r: usize, cost: &[Vec<f64>], used: &mut Vec<bool>, forbidden: f64) -> (usize, f64) {
        if r == cost.len() {
            return (0, 0.0);
        }
        let mut best = go(r + 1, cost, used, forbidden);
        for c in 0..used.len() {
            if used[c] || cost[r][c] >= forbidden {
                continue;
            }
            used[c] = true;
            let (n, s) = go(r + 1, cost, used, forbidden);
            used[c] = false;
            let cand = (n + 1, s + cost[r][c]);
            if cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                best = cand;
            }
        }
        best
    }
    let cols = cost.first().map_or(0, |r| r.len());
    go(0, cost, &mut vec![false; cols], forbidden)
}

/// Covariance-form constant-velocity Kalman filter.
pub struct TextbookKf {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub a: Matrix4<f64>,
    pub q: Matrix4<f64>,
}

impl TextbookKf {
    pub fn new(z0: Vector2<f64>, r: Matrix2<f64>, v_max: f64, dt: f64, q: f64) -> Self {
        let mut a = Matrix4::identity();
        a[(0, 2)] = dt;
        a[(1, 3)] = dt;
        let mut qm = Matrix4::zeros();
        for k in 0..2 {
            qm[(k, k)] = q * dt.powi(3) / 3.0;
            qm[(k, k + 2)] = q * dt.powi(2) / 2.0;
            qm[(k + 2, k)] = q * dt.powi(2) / 2.0;
            qm[(k + 2, k + 2)] = q * dt;
        }
        let mut p = Matrix4::zeros();
        p.fixed_view_mut::<2, 2>(0, 0).copy_from(&r);
        p[(2, 2)] = v_max * v_max;
        p[(3, 3)] = v_max * v_max;
        let mut kf = Self {
            x: Vector4::new(z0.x, z0.y, 0.0, 0.0),
            p,
            a,
            q: qm,
        };
        kf.predict();
        kf
    }

    pub fn predict(&mut self) {
        self.x = self.a * self.x;
        self.p = self.a * self.p * self.a.transpose() + self.q;
    }

    /// Measurement update; returns the filtered state, then predicts.
    pub fn step(&mut self, z: Vector2<f64>, r: Matrix2<f64>) -> Vector4<f64> {
        let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let s = h * self.p * h.transpose() + r;
        let k = self.p * h.transpose() * s.try_inverse().expect("innovation invertible");
        self.x += k * (z - h * self.x);
        let i_kh = Matrix4::identity() - k * h;
        // Joseph form
        self.p = i_kh * self.p * i_kh.transpose() + k * r * k.transpose();
        let filtered = self.x;
        self.predict();
        filtered
    }
}

/// One frame of CLEAR-MOT scored the slow way.
#[derive(Debug, PartialEq)]
pub struct BruteFrame {
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
    pub matches: BTreeMap<u64, u32>,
}

/// Previous correspondences survive when still within `d_match` (a track
/// claimed twice goes to the nearer object); everything else is matched by
/// enumerating all partial matchings for the most pairs at least distance.
pub fn brute_clear_mot(
    gt: &[(u64, Point2)],
    tracks: &[(u32, Point2)],
    history: &BTreeMap<u64, u32>,
    d_match: f64,
) -> BruteFrame {
    let mut matches = BTreeMap::new();
    let mut claims: BTreeMap<u32, (f64, u64)> = BTreeMap::new();
    for (g, gp) in gt {
        let Some(k) = history.get(g) else { continue };
        let Some((_, tp)) = tracks.iter().find(|(t, _)| t == k) else {
            continue;
        };
        let d = gp.distance(*tp);
        if d > d_match {
            continue;
        }
        let better = claims
            .get(k)
            .is_none_or(|(d0, g0)| d < *d0 || (d == *d0 && g < g0));
        if better {
            claims.insert(*k, (d, *g));
        }
    }
    for (k, (_, g)) in &claims {
        matches.insert(*g, *k);
    }

    let free_gt: Vec<&(u64, Point2)> = gt
        .iter()
        .filter(|(g, _)| !matches.contains_key(g))
        .collect();
    let free_tr: Vec<&(u32, Point2)> = tracks
        .iter()
        .filter(|(k, _)| !claims.contains_key(k))
        .collect();

    let mut best: (usize, f64, Vec<(usize, usize)>) = (0, 0.0, Vec::new());
    let mut cur = Vec::new();
    fn go(
        r: usize,
        gt: &[&(u64, Point2)],
        tr: &[&(u32, Point2)],
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        cost: f64,
        d_match: f64,
        best: &mut (usize, f64, Vec<(usize, usize)>),
    ) {
        if r == gt.len() {
            if cur.len() > best.0 || (cur.len() == best.0 && cost < best.1) {
                *best = (cur.len(), cost, cur.clone());
            }
            return;
        }
        go(r + 1, gt, tr, used, cur, cost, d_match, best);
        for c in 0..tr.len() {
            let d = gt[r].1.distance(tr[c].1);
            if used[c] || d > d_match {
                continue;
            }
            used[c] = true;
            cur.push((r, c));
            go(r + 1, gt, tr, used, cur, cost + d, d_match, best);
            cur.pop();
            used[c] = false;
        }
    }
    go(
        0,
        &free_gt,
        &free_tr,
        &mut vec![false; free_tr.len()],
        &mut cur,
        0.0,
        d_match,
        &mut best,
    );

    let mut mismatches = 0;
    for (r, c) in &best.2 {
        let (g, k) = (free_gt[*r].0, free_tr[*c].0);
        if history.get(&g).is_some_and(|prev| *prev != k) {
            mismatches += 1;
        }
        matches.insert(g, k);
    }
    BruteFrame {
        misses: gt.len() - matches.len(),
        false_positives: tracks.len() - matches.len(),
        mismatches,
        matches,
    }
}

/// Sample covariance of 2D points.
pub fn sample_cov(samples: &[Vector2<f64>]) -> Matrix2<f64> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Vector2<f64>>() / n;
    samples
        .iter()
        .map(|s| (s - mean) * (s - mean).transpose())
        .sum::<Matrix2<f64>>()
        / (n - 1.0)
}
