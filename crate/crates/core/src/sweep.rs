//! Error-level sweeps: every mode × injected σ_t × seed cell of a base
//! scenario, run independently and summarized one row per cell.

use crate::error::{Error, Result};
use crate::simulation::{
    evaluate, run_scenario, ErrorInjection, Localization, RealignMode, ScenarioConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SweepMode {
    #[serde(rename = "off")]
    Off,
    #[serde(rename = "static")]
    Static,
    #[serde(rename = "dynamic")]
    Dynamic,
    #[serde(rename = "dynamic+reactive")]
    DynamicReactive,
    #[serde(rename = "ground-truth")]
    GroundTruth,
}

impl SweepMode {
    pub const ALL: [SweepMode; 5] = [
        SweepMode::Off,
        SweepMode::Static,
        SweepMode::Dynamic,
        SweepMode::DynamicReactive,
        SweepMode::GroundTruth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepMode::Off => "off",
            SweepMode::Static => "static",
            SweepMode::Dynamic => "dynamic",
            SweepMode::DynamicReactive => "dynamic+reactive",
            SweepMode::GroundTruth => "ground-truth",
        }
    }

    /// The base scenario reconfigured for this mode.
    pub fn apply(self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut cfg = base.clone();
        cfg.realign.reactive_gate = false;
        cfg.localization = Localization::Estimated;
        match self {
            SweepMode::Off => {
                cfg.realign.mode = RealignMode::Off;
                cfg.tracking.use_alignment_cov = false;
            }
            SweepMode::Static => cfg.realign.mode = RealignMode::Static,
            SweepMode::Dynamic => cfg.realign.mode = RealignMode::Dynamic,
            SweepMode::DynamicReactive => {
                cfg.realign.mode = RealignMode::Dynamic;
                cfg.realign.reactive_gate = true;
            }
            SweepMode::GroundTruth => {
                cfg.realign.mode = RealignMode::Off;
                cfg.localization = Localization::GroundTruth;
            }
        }
        cfg
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Scenario file, relative to the spec file's directory.
    pub base_config: PathBuf,
    /// Injected translation error levels σ_t (m).
    pub levels: Vec<f64>,
    pub seeds_per_level: u64,
    pub modes: Vec<SweepMode>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.modes.is_empty() {
            return Err(Error::config("sweep needs at least one level and one mode"));
        }
        if let Some(l) = self.levels.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::Config(format!(
                "sweep levels must be non-negative, got {l}"
            )));
        }
        if self.seeds_per_level < 1 {
            return Err(Error::config("seeds_per_level must be at least 1"));
        }
        Ok(())
    }

    /// Loads the spec and resolves its base scenario.
    pub fn from_path(path: &Path) -> Result<(Self, ScenarioConfig)> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::Config(format!("file not found: {}", path.display()))
            }
            _ => Error::Io(e),
        })?;
        let spec: Self =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        let base = path
            .parent()
            .unwrap_or(Path::new("."))
            .join(&spec.base_config);
        let cfg = ScenarioConfig::from_path(&base)?;
        Ok((spec, cfg))
    }

    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for &mode in &self.modes {
            for &level in &self.levels {
                for s in 0..self.seeds_per_level {
                    out.push(SweepCell {
                        mode,
                        level,
                        seed_offset: s,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub mode: SweepMode,
    pub level: f64,
    /// Added to the base seed; shared across modes so that modes are
    /// compared on identical worlds.
    pub seed_offset: u64,
}

impl SweepCell {
    pub fn config(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut cfg = self.mode.apply(base);
        cfg.rng_seed = base.rng_seed.wrapping_add(self.seed_offset);
        cfg.error_injection = Some(ErrorInjection {
            sigma_t_m: self.level,
        });
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: SweepMode,
    pub sigma_t_m: f64,
    pub seed: u64,
    pub mota: f64,
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
    pub gt: usize,
    pub robot_mean_mota: f64,
    pub final_quarter_mota: f64,
    pub median_heading_deg: f64,
    pub median_translation_m: f64,
}

pub fn run_cell(cell: &SweepCell, base: &ScenarioConfig) -> Result<SweepRow> {
    let cfg = cell.config(base);
    let log = run_scenario(&cfg)?;
    let ev = evaluate(&log, cfg.evaluation.d_match_m, cfg.evaluation.window_s)?;
    let (h, t) = ev.alignment.as_ref().map_or((f64::NAN, f64::NAN), |a| {
        (a.median_heading_deg, a.median_translation_m)
    });
    Ok(SweepRow {
        mode: cell.mode,
        sigma_t_m: cell.level,
        seed: cfg.rng_seed,
        mota: ev.mota,
        misses: ev.totals.misses,
        false_positives: ev.totals.false_positives,
        mismatches: ev.totals.mismatches,
        gt: ev.totals.gt,
        robot_mean_mota: ev.robot_mean_mota(),
        final_quarter_mota: ev.final_quarter_mota,
        median_heading_deg: h,
        median_translation_m: t,
    })
}

/// Runs every cell in parallel. Rows come back in cell order.
pub fn run_sweep(spec: &SweepSpec, base: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.cells().par_iter().map(|c| run_cell(c, base)).collect()
}

pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::log("sweep.csv", e.to_string()))?;
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::log("sweep.csv", e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::log("sweep.csv", e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::log("sweep.csv", e.to_string())))
        .collect()
}

/// Mean of `f` over the rows of one mode and level.
pub fn mean_by<F: Fn(&SweepRow) -> f64>(
    rows: &[SweepRow],
    mode: SweepMode,
    level: f64,
    f: F,
) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.mode == mode && r.sigma_t_m == level)
        .map(f)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}
