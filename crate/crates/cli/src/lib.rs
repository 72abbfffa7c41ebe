//! Subcommand implementations for the `cotrack` binary.

use anyhow::{Context, Result};
use cotrack_core::simulation::{
    evaluate, read_summary, run_scenario, Evaluation, RunLog, ScenarioConfig,
};
use cotrack_core::sweep::{mean_by, run_cell, write_rows, SweepRow, SweepSpec};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

fn print_summary(ev: &Evaluation, out: &mut impl Write) -> Result<()> {
    for (k, v) in ev.summary() {
        writeln!(out, "{k:<34} {v}")?;
    }
    Ok(())
}

/// Runs one scenario, writes its log and evaluation to `out_dir`, and
/// prints the summary.
pub fn cmd_run(
    config: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    out: &mut impl Write,
) -> Result<Evaluation> {
    let mut cfg = ScenarioConfig::from_path(config)?;
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    let log = run_scenario(&cfg)?;
    log.write_dir(out_dir)
        .with_context(|| format!("writing run log to {}", out_dir.display()))?;
    std::fs::write(out_dir.join("config.toml"), cfg.to_toml_string())?;
    let ev = evaluate(&log, cfg.evaluation.d_match_m, cfg.evaluation.window_s)?;
    ev.write_dir(out_dir)?;
    print_summary(&ev, out)?;
    Ok(ev)
}

/// Recomputes every metric from a run log directory. `d_match` and
/// `window_s` default to the values recorded in the log.
pub fn cmd_eval(
    log_dir: &Path,
    out_dir: Option<&Path>,
    d_match: Option<f64>,
    window_s: Option<f64>,
    out: &mut impl Write,
) -> Result<Evaluation> {
    let log = RunLog::read_dir(log_dir)?;
    let recorded = |k: &str| -> Result<f64> {
        let v = log
            .meta_value(k)
            .with_context(|| format!("meta.csv is missing {k}"))?;
        Ok(v.parse()?)
    };
    let d = match d_match {
        Some(d) => d,
        None => recorded("d_match_m")?,
    };
    let w = match window_s {
        Some(w) => w,
        None => recorded("window_s")?,
    };
    let ev = evaluate(&log, d, w)?;
    if let Some(dir) = out_dir {
        ev.write_dir(dir)?;
    }
    print_summary(&ev, out)?;
    Ok(ev)
}

fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    write(&tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every sweep cell. Each finished cell lands in `cells/` on its own;
/// the combined `sweep.csv` and the per-mode, per-level `sweep_means.csv`
/// are written at the end.
pub fn cmd_sweep(
    spec_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    out: &mut impl Write,
) -> Result<Vec<SweepRow>> {
    let (spec, mut base) = SweepSpec::from_path(spec_path)?;
    if let Some(s) = seed {
        base.rng_seed = s;
    }
    let cells_dir = out_dir.join("cells");
    std::fs::create_dir_all(&cells_dir)?;
    let rows: Vec<SweepRow> = spec
        .cells()
        .par_iter()
        .map(|cell| {
            let row = run_cell(cell, &base)?;
            let name = format!(
                "{}_{}_{}.csv",
                cell.mode.as_str().replace('+', "_"),
                cell.level,
                row.seed
            );
            write_atomic(&cells_dir.join(name), |p| {
                Ok(write_rows(p, std::slice::from_ref(&row))?)
            })?;
            Ok(row)
        })
        .collect::<Result<_>>()?;
    write_atomic(&out_dir.join("sweep.csv"), |p| Ok(write_rows(p, &rows)?))?;

    let mut means = csv::Writer::from_path(out_dir.join("sweep_means.csv"))?;
    means.write_record([
        "mode",
        "sigma_t_m",
        "mota",
        "misses",
        "false_positives",
        "mismatches",
    ])?;
    writeln!(
        out,
        "{:<18} {:>8} {:>8} {:>9} {:>9} {:>9}",
        "mode", "sigma_t", "mota", "misses", "fp", "mme"
    )?;
    for &mode in &spec.modes {
        for &level in &spec.levels {
            let m = [
                mean_by(&rows, mode, level, |r| r.mota),
                mean_by(&rows, mode, level, |r| r.misses as f64),
                mean_by(&rows, mode, level, |r| r.false_positives as f64),
                mean_by(&rows, mode, level, |r| r.mismatches as f64),
            ];
            means.write_record(
                [mode.as_str().to_string(), level.to_string()]
                    .into_iter()
                    .chain(m.iter().map(f64::to_string)),
            )?;
            writeln!(
                out,
                "{:<18} {:>8.2} {:>8.3} {:>9.1} {:>9.1} {:>9.1}",
                mode.as_str(),
                level,
                m[0],
                m[1],
                m[2],
                m[3]
            )?;
        }
    }
    means.flush()?;
    Ok(rows)
}

/// `summary.csv` written by `run`, for comparing against `eval` output.
pub fn load_summary(dir: &Path) -> Result<Vec<(String, f64)>> {
    Ok(read_summary(&dir.join("summary.csv"))?)
}
