//! CLEAR-MOT accuracy and frame-alignment error statistics.

use crate::error::{Error, Result};
use crate::geometry::{transform_error, Point2, Pose2};
use crate::tracking::{hungarian, FORBIDDEN};
use std::collections::BTreeMap;

pub type GtId = u64;

/// Error components of one evaluated frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameEval<K> {
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
    pub gt_count: usize,
    pub matches: BTreeMap<GtId, K>,
}

impl<K> FrameEval<K> {
    pub fn errors(&self) -> usize {
        self.misses + self.false_positives + self.mismatches
    }
}

/// Matches ground truth to tracks for one frame.
///
/// `history` holds the most recent track matched to each ground-truth id.
/// Those pairs are kept when both are present and within `d_match`; the
/// rest are matched by minimum total distance, gated at `d_match`. A
/// mismatch is counted when a ground-truth id is matched to a track other
/// than its most recent one.
pub fn eval_frame<K: Ord + Clone>(
    gt: &[(GtId, Point2)],
    tracks: &[(K, Point2)],
    history: &BTreeMap<GtId, K>,
    d_match: f64,
) -> FrameEval<K> {
    let mut gt_used = vec![false; gt.len()];
    let mut tr_used = vec![false; tracks.len()];
    let mut matches = BTreeMap::new();

    let mut carried: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, (gid, gp)) in gt.iter().enumerate() {
        let Some(prev) = history.get(gid) else {
            continue;
        };
        if let Some(ti) = tracks.iter().position(|(k, _)| k == prev) {
            let d = gp.distance(tracks[ti].1);
            if d <= d_match {
                carried.push((d, gi, ti));
            }
        }
    }
    carried.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, gi, ti) in carried {
        if gt_used[gi] || tr_used[ti] {
            continue;
        }
        gt_used[gi] = true;
        tr_used[ti] = true;
        matches.insert(gt[gi].0, tracks[ti].0.clone());
    }

    let free_gt: Vec<usize> = (0..gt.len()).filter(|&i| !gt_used[i]).collect();
    let free_tr: Vec<usize> = (0..tracks.len()).filter(|&i| !tr_used[i]).collect();
    let mut mismatches = 0;
    if !free_gt.is_empty() && !free_tr.is_empty() {
        let cost: Vec<Vec<f64>> = free_gt
            .iter()
            .map(|&g| {
                free_tr
                    .iter()
                    .map(|&t| {
                        let d = gt[g].1.distance(tracks[t].1);
                        if d <= d_match {
                            d
                        } else {
                            FORBIDDEN
                        }
                    })
                    .collect()
            })
            .collect();
        for (r, c) in hungarian(&cost).pairs() {
            let (g, t) = (free_gt[r], free_tr[c]);
            gt_used[g] = true;
            tr_used[t] = true;
            let key = tracks[t].0.clone();
            if history.get(&gt[g].0).is_some_and(|prev| *prev != key) {
                mismatches += 1;
            }
            matches.insert(gt[g].0, key);
        }
    }

    FrameEval {
        misses: gt_used.iter().filter(|u| !**u).count(),
        false_positives: tr_used.iter().filter(|u| !**u).count(),
        mismatches,
        gt_count: gt.len(),
        matches,
    }
}

/// Sequence of evaluated frames with the running match history.
#[derive(Debug, Clone)]
pub struct MotAccumulator<K> {
    pub d_match: f64,
    pub frames: Vec<FrameEval<K>>,
    history: BTreeMap<GtId, K>,
}

impl<K: Ord + Clone> MotAccumulator<K> {
    pub fn new(d_match: f64) -> Self {
        Self {
            d_match,
            frames: Vec::new(),
            history: BTreeMap::new(),
        }
    }

    pub fn update(&mut self, gt: &[(GtId, Point2)], tracks: &[(K, Point2)]) -> &FrameEval<K> {
        let eval = eval_frame(gt, tracks, &self.history, self.d_match);
        for (g, k) in &eval.matches {
            self.history.insert(*g, k.clone());
        }
        self.frames.push(eval);
        self.frames.last().expect("just pushed")
    }

    pub fn totals(&self) -> Totals {
        Totals::over(&self.frames)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Totals {
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
    pub gt: usize,
}

impl Totals {
    pub fn over<K>(frames: &[FrameEval<K>]) -> Self {
        frames.iter().fold(Totals::default(), |t, f| Totals {
            misses: t.misses + f.misses,
            false_positives: t.false_positives + f.false_positives,
            mismatches: t.mismatches + f.mismatches,
            gt: t.gt + f.gt_count,
        })
    }

    pub fn mota(&self) -> Result<f64> {
        if self.gt == 0 {
            return Err(Error::EmptyGroundTruth);
        }
        Ok(1.0 - (self.misses + self.false_positives + self.mismatches) as f64 / self.gt as f64)
    }
}

/// `1 − Σ(m + fp + mme) / Σ g` over all frames.
pub fn mota<K: Ord + Clone>(acc: &MotAccumulator<K>) -> Result<f64> {
    acc.totals().mota()
}

/// MOTA over every contiguous window of `window_s` seconds, stepped by one
/// frame. Windows without ground truth yield NaN.
pub fn sliding_mota<K: Ord + Clone>(
    acc: &MotAccumulator<K>,
    window_s: f64,
    frame_rate_hz: f64,
) -> Vec<f64> {
    let n = acc.frames.len();
    if n == 0 {
        return Vec::new();
    }
    let w = ((window_s * frame_rate_hz).round() as usize).clamp(1, n);
    (0..=n - w)
        .map(|s| {
            Totals::over(&acc.frames[s..s + w])
                .mota()
                .unwrap_or(f64::NAN)
        })
        .collect()
}

/// Fixed-width histogram; values beyond the last edge land in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(bin_width: f64, bins: usize, values: &[f64]) -> Self {
        let mut counts = vec![0; bins.max(1)];
        for v in values {
            let b = ((v / bin_width).floor().max(0.0) as usize).min(counts.len() - 1);
            counts[b] += 1;
        }
        Self { bin_width, counts }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentStats {
    pub median_heading_deg: f64,
    pub median_translation_m: f64,
    pub samples: usize,
    pub heading_hist: Histogram,
    pub translation_hist: Histogram,
}

pub const HEADING_BIN_DEG: f64 = 0.5;
pub const TRANSLATION_BIN_M: f64 = 0.05;
pub const HIST_BINS: usize = 40;

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pools `transform_error` over (estimate, truth) alignment pairs.
pub fn alignment_stats(pairs: &[(Pose2, Pose2)]) -> AlignmentStats {
    let (t, h): (Vec<f64>, Vec<f64>) = pairs.iter().map(|(e, g)| transform_error(e, g)).unzip();
    AlignmentStats {
        median_heading_deg: median(&h),
        median_translation_m: median(&t),
        samples: pairs.len(),
        heading_hist: Histogram::new(HEADING_BIN_DEG, HIST_BINS, &h),
        translation_hist: Histogram::new(TRANSLATION_BIN_M, HIST_BINS, &t),
    }
}

/// Merges per-robot tracks that share an id into one team track at their
/// mean position. Output is ordered by key.
pub fn merge_team_tracks<K: Ord + Clone>(tracks: &[(K, Point2)]) -> Vec<(K, Point2)> {
    let mut acc: BTreeMap<K, (f64, f64, usize)> = BTreeMap::new();
    for (k, p) in tracks {
        let e = acc.entry(k.clone()).or_insert((0.0, 0.0, 0));
        e.0 += p.x;
        e.1 += p.y;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(k, (x, y, n))| (k, Point2::new(x / n as f64, y / n as f64)))
        .collect()
}
