mod common;

use common::configs_dir;
use cotrack_core::simulation::{
    evaluate, run_scenario, Localization, NoiseConfig, RealignConfig, RealignMode, RunLog,
    ScenarioConfig, TrackingConfig,
};
use cotrack_core::sweep::{SweepMode, SweepSpec};
use cotrack_core::Error;
use std::collections::BTreeSet;

const SHIPPED: [&str; 3] = ["static_room.toml", "mobile_room.toml", "example_full.toml"];

fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::from_path(&configs_dir().join(name)).unwrap()
}

/// Closed 36-gon around (5, 5), smooth enough for a constant-velocity model.
fn smooth_loop() -> String {
    let pts: Vec<String> = (0..36)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 36.0;
            format!("[{:.4}, {:.4}]", 5.0 + 1.5 * a.cos(), 5.0 + 1.5 * a.sin())
        })
        .collect();
    format!("[{}]", pts.join(", "))
}

fn two_watchers(extra: &str) -> ScenarioConfig {
    let path = smooth_loop();
    let text = format!(
        r#"
duration_s = 20.0
rng_seed = 3

[[robots]]
trajectory = {{ kind = "static", pose = {{ x = 1.0, y = 5.0, theta = 0.0 }} }}
fov = {{ range_m = 9.0, half_angle_rad = 1.2 }}

[[robots]]
trajectory = {{ kind = "static", pose = {{ x = 9.0, y = 5.0, theta = 3.141592653589793 }} }}
fov = {{ range_m = 9.0, half_angle_rad = 1.2 }}

[[pedestrians]]
waypoints = {path}
speed_mps = 0.8

[noise.detection]
sigma_m = 0.0
reported_sigma_m = 0.05
p_detect = 1.0
{extra}
"#
    );
    ScenarioConfig::from_toml_str(&text).unwrap()
}

#[test]
fn shipped_configs_round_trip() {
    for name in SHIPPED {
        let cfg = load(name);
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back, "{name}");
    }
}

#[test]
fn full_example_lists_the_defaults() {
    let cfg = load("example_full.toml");
    assert_eq!(cfg.noise, NoiseConfig::default());
    assert_eq!(cfg.realign, RealignConfig::default());
    assert_eq!(cfg.tracking, TrackingConfig::default());
    assert_eq!(cfg.localization, Localization::Estimated);
    assert!(cfg.comm.edges.is_empty());
    assert_eq!(
        (cfg.evaluation.d_match_m, cfg.evaluation.window_s),
        (1.0, 10.0)
    );
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    let base = load("static_room.toml").to_toml_string();
    let err = ScenarioConfig::from_toml_str(&format!("bogus_key = 1\n{base}")).unwrap_err();
    assert!(err.to_string().contains("bogus_key"), "{err}");

    let mut cfg = load("static_room.toml");
    cfg.noise.detection.p_detect = 1.5;
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));

    let mut cfg = load("static_room.toml");
    cfg.comm.edges = vec![[0, 1], [2, 3]];
    let err = cfg.validate().unwrap_err().to_string();
    assert!(err.contains("connected"), "{err}");
}

#[test]
fn single_noiseless_watcher_tracks_one_pedestrian() {
    let mut cfg = two_watchers("");
    cfg.robots.truncate(1);
    let log = run_scenario(&cfg).unwrap();
    let sigma = cfg.noise.detection.reported();
    let n = cfg.frame_count();
    let truth: Vec<(f64, f64)> = log
        .ground_truth
        .iter()
        .filter(|g| g.kind == "pedestrian")
        .map(|g| (g.x, g.y))
        .collect();
    assert_eq!(truth.len() as u64, n);

    let confirmed: Vec<_> = log
        .tracks
        .iter()
        .filter(|t| t.status == "confirmed")
        .collect();
    let ids: BTreeSet<&str> = confirmed.iter().map(|t| t.track_id.as_str()).collect();
    assert_eq!(ids.len(), 1, "{ids:?}");
    // confirmed from the third frame on
    assert!(confirmed.len() as u64 >= n - 3);
    for t in confirmed {
        let (x, y) = truth[t.frame as usize];
        let err = (t.world_x - x).hypot(t.world_y - y);
        assert!(err < 3.0 * sigma, "frame {}: error {err}", t.frame);
    }
}

#[test]
fn two_robots_converge_on_one_track_id() {
    let log = run_scenario(&two_watchers("")).unwrap();
    let last = log.tracks.iter().map(|t| t.frame).max().unwrap();
    let ids: BTreeSet<(usize, &str)> = log
        .tracks
        .iter()
        .filter(|t| t.frame == last && t.status == "confirmed")
        .map(|t| (t.robot, t.track_id.as_str()))
        .collect();
    let robots: BTreeSet<usize> = ids.iter().map(|p| p.0).collect();
    let names: BTreeSet<&str> = ids.iter().map(|p| p.1).collect();
    assert_eq!(robots.len(), 2, "{ids:?}");
    assert_eq!(names.len(), 1, "{ids:?}");
    let ev = evaluate(&log, 1.0, 10.0).unwrap();
    assert!(ev.mota > 0.95, "{}", ev.mota);
}

#[test]
fn log_round_trips_through_csv() {
    let mut cfg = load("mobile_room.toml");
    cfg.duration_s = 15.0;
    let log = run_scenario(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    log.write_dir(dir.path()).unwrap();
    let back = RunLog::read_dir(dir.path()).unwrap();
    assert_eq!(back.meta, log.meta);
    assert_eq!(back.ground_truth.len(), log.ground_truth.len());
    assert_eq!(back.tracks.len(), log.tracks.len());
    let a = evaluate(&log, 1.0, 10.0).unwrap();
    let b = evaluate(&back, 1.0, 10.0).unwrap();
    assert_eq!(a.summary(), b.summary());
}

#[test]
fn reading_a_missing_or_damaged_log_names_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let err = RunLog::read_dir(&dir.path().join("nope"))
        .unwrap_err()
        .to_string();
    assert!(err.contains("file not found"), "{err}");

    let mut cfg = two_watchers("");
    cfg.duration_s = 2.0;
    run_scenario(&cfg).unwrap().write_dir(dir.path()).unwrap();
    let path = dir.path().join("tracks.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let cut = text.len() - text.lines().last().unwrap().len() / 2 - 1;
    std::fs::write(&path, &text[..cut]).unwrap();
    let err = RunLog::read_dir(dir.path()).unwrap_err().to_string();
    assert!(err.contains("tracks"), "{err}");
}

#[test]
fn unrealigned_drift_grows_with_run_length() {
    let base = ScenarioConfig::from_toml_str(
        r#"
duration_s = 5.0
[[robots]]
trajectory = { kind = "circular", center = [3.0, 3.0], radius_m = 1.5, angular_rate_rps = 0.4 }
[[robots]]
trajectory = { kind = "circular", center = [7.0, 7.0], radius_m = 1.5, angular_rate_rps = 0.4 }
[noise.odom]
sigma_v = 0.01
sigma_omega = 0.01
"#,
    )
    .unwrap();
    let mean_final_error = |duration_s: f64| {
        let mut total = 0.0;
        for seed in 0..20 {
            let cfg = ScenarioConfig {
                duration_s,
                rng_seed: seed,
                ..base.clone()
            };
            let log = run_scenario(&cfg).unwrap();
            let last = log.alignments.last().unwrap();
            total += (last.est_x - last.true_x).hypot(last.est_y - last.true_y);
        }
        total / 20.0
    };
    let errs: Vec<f64> = [5.0, 10.0, 20.0, 40.0].map(mean_final_error).to_vec();
    assert!(errs.windows(2).all(|w| w[1] >= w[0]), "{errs:?}");
    assert!(errs[0] > 0.0);
}

#[test]
fn stationary_robots_do_not_drift() {
    let mut cfg = two_watchers("[noise.odom]\nsigma_v = 0.05\nsigma_omega = 0.05");
    cfg.duration_s = 5.0;
    let log = run_scenario(&cfg).unwrap();
    for a in &log.alignments {
        assert!((a.est_x - a.true_x).abs() < 1e-9 && (a.est_theta - a.true_theta).abs() < 1e-9);
    }
}

#[test]
fn sweep_spec_cells_and_modes() {
    let (spec, base) = SweepSpec::from_path(&configs_dir().join("error_sweep.toml")).unwrap();
    assert_eq!(
        spec.cells().len() as u64,
        spec.modes.len() as u64 * spec.levels.len() as u64 * spec.seeds_per_level
    );
    assert_eq!(base.name, "static_room");
    for m in SweepMode::ALL {
        assert_eq!(m.as_str().parse::<SweepMode>().unwrap(), m);
    }
    assert!("sideways".parse::<SweepMode>().is_err());
    assert_eq!(SweepMode::Off.apply(&base).realign.mode, RealignMode::Off);
    let r = SweepMode::DynamicReactive.apply(&base);
    assert!(r.realign.reactive_gate && r.realign.mode == RealignMode::Dynamic);
    assert_eq!(
        SweepMode::GroundTruth.apply(&base).localization,
        Localization::GroundTruth
    );

    let bad = SweepSpec {
        levels: vec![-0.1],
        ..spec.clone()
    };
    assert!(bad.validate().is_err());
    let bad = SweepSpec {
        seeds_per_level: 0,
        ..spec
    };
    assert!(bad.validate().is_err());
}
