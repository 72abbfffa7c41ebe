//! Per-run CSV tables and the evaluation computed from them.

use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose2};
use crate::metrics::{
    alignment_stats, merge_team_tracks, sliding_mota, AlignmentStats, MotAccumulator, Totals,
};
use crate::tracking::TrackId;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRow {
    pub frame: u64,
    /// `pedestrian` or `robot`.
    pub kind: String,
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: u64,
    pub robot: usize,
    pub track_id: String,
    pub status: String,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub trace_p: f64,
    pub world_x: f64,
    pub world_y: f64,
}

/// Estimated and true i→j frame alignment for one pair and frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRow {
    pub frame: u64,
    pub i: usize,
    pub j: usize,
    pub est_x: f64,
    pub est_y: f64,
    pub est_theta: f64,
    pub true_x: f64,
    pub true_y: f64,
    pub true_theta: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub var_theta: f64,
    /// `static`, `dynamic`, or `hold` when no realignment happened.
    pub method: String,
    pub corr_t: f64,
    pub corr_r: f64,
}

impl AlignmentRow {
    pub fn estimate(&self) -> Pose2 {
        Pose2::new(self.est_x, self.est_y, self.est_theta)
    }

    pub fn truth(&self) -> Pose2 {
        Pose2::new(self.true_x, self.true_y, self.true_theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub frame: u64,
    pub robot: usize,
    pub stage: String,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MetaRow {
    key: String,
    value: String,
}

/// Everything recorded during one scenario run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub meta: Vec<(String, String)>,
    pub ground_truth: Vec<GtRow>,
    pub tracks: Vec<TrackRow>,
    pub alignments: Vec<AlignmentRow>,
    pub timings: Vec<TimingRow>,
}

fn write_table<T: Serialize>(dir: &Path, name: &str, rows: &[T], header: &[&str]) -> Result<()> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::log(name, e.to_string()))?;
    if rows.is_empty() {
        w.write_record(header)
            .map_err(|e| Error::log(name, e.to_string()))?;
    }
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::log(name, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn read_table<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::log(
            name,
            format!("file not found: {}", path.display()),
        ));
    }
    let mut r = csv::Reader::from_path(&path).map_err(|e| Error::log(name, e.to_string()))?;
    r.deserialize()
        .enumerate()
        .map(|(k, row)| row.map_err(|e| Error::log(name, format!("row {}: {e}", k + 1))))
        .collect()
}

impl RunLog {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn meta_f64(&self, key: &str) -> Result<f64> {
        let v = self
            .meta_value(key)
            .ok_or_else(|| Error::log("meta.csv", format!("missing key {key}")))?;
        v.parse()
            .map_err(|_| Error::log("meta.csv", format!("{key} is not a number: {v}")))
    }

    pub fn frame_rate_hz(&self) -> Result<f64> {
        self.meta_f64("frame_rate_hz")
    }

    pub fn frame_count(&self) -> Result<u64> {
        Ok(self.meta_f64("frames")? as u64)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let meta: Vec<MetaRow> = self
            .meta
            .iter()
            .map(|(k, v)| MetaRow {
                key: k.clone(),
                value: v.clone(),
            })
            .collect();
        write_table(dir, "meta.csv", &meta, &["key", "value"])?;
        write_table(
            dir,
            "ground_truth.csv",
            &self.ground_truth,
            &["frame", "kind", "id", "x", "y", "theta"],
        )?;
        write_table(
            dir,
            "tracks.csv",
            &self.tracks,
            &[
                "frame", "robot", "track_id", "status", "x", "y", "vx", "vy", "trace_p", "world_x",
                "world_y",
            ],
        )?;
        write_table(
            dir,
            "alignments.csv",
            &self.alignments,
            &[
                "frame",
                "i",
                "j",
                "est_x",
                "est_y",
                "est_theta",
                "true_x",
                "true_y",
                "true_theta",
                "var_x",
                "var_y",
                "var_theta",
                "method",
                "corr_t",
                "corr_r",
            ],
        )?;
        if !self.timings.is_empty() {
            write_table(
                dir,
                "timings.csv",
                &self.timings,
                &["frame", "robot", "stage", "ms"],
            )?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::Config(format!("file not found: {}", dir.display())));
        }
        let meta: Vec<MetaRow> = read_table(dir, "meta.csv")?;
        let timings = if dir.join("timings.csv").exists() {
            read_table(dir, "timings.csv")?
        } else {
            Vec::new()
        };
        Ok(Self {
            meta: meta.into_iter().map(|m| (m.key, m.value)).collect(),
            ground_truth: read_table(dir, "ground_truth.csv")?,
            tracks: read_table(dir, "tracks.csv")?,
            alignments: read_table(dir, "alignments.csv")?,
            timings,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingSummary {
    pub stage: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Team MOTA: confirmed tracks of all robots merged by id.
    pub totals: Totals,
    pub mota: f64,
    /// Each robot scored on its own confirmed tracks.
    pub robot_mota: Vec<f64>,
    /// Sliding-window MOTA keyed by the window's last frame.
    pub window: Vec<(u64, f64)>,
    /// Mean sliding-window MOTA over windows ending in the last quarter.
    pub final_quarter_mota: f64,
    pub alignment: Option<AlignmentStats>,
    pub timings: Vec<TimingSummary>,
}

fn mean_finite(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v
        .filter(|x| x.is_finite())
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Scores a run. Everything is derived from the log tables, so a log read
/// back from disk evaluates identically.
pub fn evaluate(log: &RunLog, d_match: f64, window_s: f64) -> Result<Evaluation> {
    let frames = log.frame_count()?;
    let fr = log.frame_rate_hz()?;
    let robots = log.meta_f64("robots")? as usize;

    let mut gt: BTreeMap<u64, Vec<(u64, Point2)>> = BTreeMap::new();
    for r in log.ground_truth.iter().filter(|r| r.kind == "pedestrian") {
        gt.entry(r.frame)
            .or_default()
            .push((r.id, Point2::new(r.x, r.y)));
    }
    let mut per_frame: BTreeMap<u64, Vec<(usize, TrackId, Point2)>> = BTreeMap::new();
    for r in log.tracks.iter().filter(|r| r.status == "confirmed") {
        let id: TrackId = r
            .track_id
            .parse()
            .map_err(|e: String| Error::log("tracks.csv", e))?;
        per_frame.entry(r.frame).or_default().push((
            r.robot,
            id,
            Point2::new(r.world_x, r.world_y),
        ));
    }

    let mut team = MotAccumulator::<TrackId>::new(d_match);
    let mut solo: Vec<MotAccumulator<TrackId>> =
        (0..robots).map(|_| MotAccumulator::new(d_match)).collect();
    let empty = Vec::new();
    for k in 0..frames {
        let g = gt.get(&k).unwrap_or(&empty);
        let rows = per_frame.get(&k).map(Vec::as_slice).unwrap_or(&[]);
        let all: Vec<(TrackId, Point2)> = rows.iter().map(|&(_, id, p)| (id, p)).collect();
        team.update(g, &merge_team_tracks(&all));
        for (i, acc) in solo.iter_mut().enumerate() {
            let mine: Vec<(TrackId, Point2)> = rows
                .iter()
                .filter(|r| r.0 == i)
                .map(|&(_, id, p)| (id, p))
                .collect();
            acc.update(g, &mine);
        }
    }

    let totals = team.totals();
    let mota = totals.mota()?;
    let robot_mota = solo
        .iter()
        .map(|a| a.totals().mota().unwrap_or(f64::NAN))
        .collect();
    let sliding = sliding_mota(&team, window_s, fr);
    let w = frames as usize + 1 - sliding.len();
    let window: Vec<(u64, f64)> = sliding
        .iter()
        .enumerate()
        .map(|(s, &m)| ((s + w - 1) as u64, m))
        .collect();
    let cut = frames * 3 / 4;
    let final_quarter_mota = mean_finite(window.iter().filter(|(f, _)| *f >= cut).map(|w| w.1));

    let pairs: Vec<(Pose2, Pose2)> = log
        .alignments
        .iter()
        .map(|r| (r.estimate(), r.truth()))
        .collect();
    let alignment = (!pairs.is_empty()).then(|| alignment_stats(&pairs));

    let mut stages: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for t in &log.timings {
        stages.entry(t.stage.as_str()).or_default().push(t.ms);
    }
    let timings = stages
        .into_iter()
        .map(|(stage, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            TimingSummary {
                stage: stage.to_string(),
                mean_ms: mean,
                std_ms: var.sqrt(),
                samples: v.len(),
            }
        })
        .collect();

    Ok(Evaluation {
        totals,
        mota,
        robot_mota,
        window,
        final_quarter_mota,
        alignment,
        timings,
    })
}

impl Evaluation {
    pub fn robot_mean_mota(&self) -> f64 {
        mean_finite(self.robot_mota.iter().copied())
    }

    /// Flat `(metric, value)` list, as written to `summary.csv`.
    pub fn summary(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("mota".to_string(), self.mota),
            ("misses".into(), self.totals.misses as f64),
            ("false_positives".into(), self.totals.false_positives as f64),
            ("mismatches".into(), self.totals.mismatches as f64),
            ("gt".into(), self.totals.gt as f64),
            ("robot_mean_mota".into(), self.robot_mean_mota()),
            ("final_quarter_window_mota".into(), self.final_quarter_mota),
        ];
        if let Some(a) = &self.alignment {
            out.push(("alignment_samples".into(), a.samples as f64));
            out.push(("alignment_median_heading_deg".into(), a.median_heading_deg));
            out.push((
                "alignment_median_translation_m".into(),
                a.median_translation_m,
            ));
        }
        for t in &self.timings {
            out.push((format!("timing_{}_mean_ms", t.stage), t.mean_ms));
            out.push((format!("timing_{}_std_ms", t.stage), t.std_ms));
        }
        out
    }

    /// Writes `summary.csv`, `window_mota.csv` and `alignment_hist.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let io = |name: &str, e: csv::Error| Error::log(name, e.to_string());

        let mut w =
            csv::Writer::from_path(dir.join("summary.csv")).map_err(|e| io("summary.csv", e))?;
        w.write_record(["metric", "value"])
            .map_err(|e| io("summary.csv", e))?;
        for (k, v) in self.summary() {
            w.write_record([k, v.to_string()])
                .map_err(|e| io("summary.csv", e))?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("window_mota.csv"))
            .map_err(|e| io("window_mota.csv", e))?;
        w.write_record(["frame", "mota"])
            .map_err(|e| io("window_mota.csv", e))?;
        for (f, m) in &self.window {
            w.write_record([f.to_string(), m.to_string()])
                .map_err(|e| io("window_mota.csv", e))?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("alignment_hist.csv"))
            .map_err(|e| io("alignment_hist.csv", e))?;
        w.write_record(["quantity", "bin_start", "bin_end", "count"])
            .map_err(|e| io("alignment_hist.csv", e))?;
        if let Some(a) = &self.alignment {
            for (name, h) in [
                ("heading_deg", &a.heading_hist),
                ("translation_m", &a.translation_hist),
            ] {
                for (b, c) in h.counts.iter().enumerate() {
                    let lo = b as f64 * h.bin_width;
                    w.write_record([
                        name.to_string(),
                        lo.to_string(),
                        (lo + h.bin_width).to_string(),
                        c.to_string(),
                    ])
                    .map_err(|e| io("alignment_hist.csv", e))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a `summary.csv` back as `(metric, value)` pairs.
pub fn read_summary(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| Error::log("summary.csv", e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::log("summary.csv", e.to_string())))
        .collect()
}
