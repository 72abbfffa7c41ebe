use super::config::{Localization, RealignMode, ScenarioConfig};
use super::runlog::{AlignmentRow, GtRow, RunLog, TimingRow, TrackRow};
use super::sensors::{
    detect_landmarks, detect_pedestrians, inject_alignment_error, integrate, select_realign_mode,
    step_odometry, RobotView,
};
use super::world::{robot_pose, walk};
use crate::error::Result;
use crate::geometry::{NoisyTransform, Point2, Pose2, PoseCov};
use crate::network::{exchange_round, schedule_map_shares, Envelope, Message, Recipient};
use crate::registration::{
    align_dynamic, align_static, AlignMethod, AlignmentResult, CoDetection, Correction, LandmarkMap,
};
use crate::tracking::{adapt_gate, InfoMessage, MotionModel, Tracker};
use nalgebra::{Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

struct Robot {
    origin: Pose2,
    true_pose: Pose2,
    est: Pose2,
    sigma: PoseCov,
    tracker: Tracker,
    map: LandmarkMap,
    rng_odom: ChaCha8Rng,
    rng_det: ChaCha8Rng,
    rng_lmk: ChaCha8Rng,
}

impl Robot {
    /// Maps the robot's local frame into the world.
    fn local_to_world(&self) -> Pose2 {
        self.true_pose.compose(&self.est.inverse())
    }
}

fn true_alignment(from: &Robot, to: &Robot) -> Pose2 {
    to.local_to_world()
        .inverse()
        .compose(&from.local_to_world())
}

/// A co-detection with the neighbor measurement kept in the neighbor's own
/// frame, so it can be re-expressed after every realignment.
#[derive(Debug, Clone, Copy)]
struct StoredCoDetection {
    frame: u64,
    state: Vector4<f64>,
    local: Point2,
    remote_raw: Point2,
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(s);
    r
}

const INJECTION_STREAM: u64 = 1;

fn robot_stream(seed: u64, robot: usize, k: u64) -> ChaCha8Rng {
    stream(seed, 16 + 4 * robot as u64 + k)
}

fn meta(cfg: &ScenarioConfig, mode: RealignMode) -> Vec<(String, String)> {
    let loc = match cfg.localization {
        Localization::Estimated => "estimated",
        Localization::GroundTruth => "ground_truth",
    };
    let t = &cfg.tracking;
    [
        ("name", cfg.name.clone()),
        ("rng_seed", cfg.rng_seed.to_string()),
        ("frame_rate_hz", cfg.frame_rate_hz.to_string()),
        ("duration_s", cfg.duration_s.to_string()),
        ("frames", cfg.frame_count().to_string()),
        ("robots", cfg.robots.len().to_string()),
        ("pedestrians", cfg.pedestrians.len().to_string()),
        ("landmarks", cfg.landmarks.len().to_string()),
        ("localization", loc.to_string()),
        ("realign_mode", mode.as_str().to_string()),
        ("reactive_gate", cfg.realign.reactive_gate.to_string()),
        (
            "sigma_t_m",
            cfg.error_injection.map_or(0.0, |e| e.sigma_t_m).to_string(),
        ),
        ("tau_gate", t.tau_gate.to_string()),
        ("q", t.q.to_string()),
        ("n_confirm", t.track.n_confirm.to_string()),
        ("n_miss_max", t.track.n_miss_max.to_string()),
        ("gain_cap", t.track.gain_cap.to_string()),
        ("use_pose_cov", t.use_pose_cov.to_string()),
        ("use_alignment_cov", t.use_alignment_cov.to_string()),
        ("detection_sigma_m", cfg.noise.detection.sigma_m.to_string()),
        (
            "detection_reported_sigma_m",
            cfg.noise.detection.reported().to_string(),
        ),
        ("d_match_m", cfg.evaluation.d_match_m.to_string()),
        ("window_s", cfg.evaluation.window_s.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn max_correction(a: Correction, b: Correction) -> Correction {
    Correction {
        trans_m: a.trans_m.max(b.trans_m),
        rot_rad: a.rot_rad.max(b.rot_rad),
    }
}

/// Runs one scenario end to end and records every table of the run log.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunLog> {
    cfg.validate()?;
    let graph = cfg.comm_graph()?;
    let n = cfg.robots.len();
    let dt = cfg.dt();
    let frames = cfg.frame_count();
    let gt_loc = cfg.localization == Localization::GroundTruth;
    let mode = if gt_loc {
        RealignMode::Off
    } else {
        cfg.realign.mode
    };
    let model = MotionModel::constant_velocity(dt, cfg.tracking.q);
    let params = cfg.align_params();
    let landmarks: Vec<Point2> = cfg
        .landmarks
        .iter()
        .map(|l| Point2::new(l[0], l[1]))
        .collect();
    let use_align_cov = cfg.tracking.use_alignment_cov;

    let mut robots: Vec<Robot> = cfg
        .robots
        .iter()
        .enumerate()
        .map(|(i, rc)| {
            let w0 = robot_pose(rc, 0.0);
            Robot {
                origin: w0,
                true_pose: w0,
                est: Pose2::IDENTITY,
                sigma: PoseCov::zeros(),
                tracker: Tracker::new(i, model, cfg.tracking.tau_gate, cfg.tracking.track),
                map: LandmarkMap::new(i),
                rng_odom: robot_stream(cfg.rng_seed, i, 0),
                rng_det: robot_stream(cfg.rng_seed, i, 1),
                rng_lmk: robot_stream(cfg.rng_seed, i, 2),
            }
        })
        .collect();

    // align[i][j] maps robot i's local frame into robot j's.
    let init_cov = if mode != RealignMode::Off && use_align_cov {
        let (st, sh) = (
            cfg.realign.initial_sigma_t_m,
            cfg.realign.initial_sigma_theta_rad,
        );
        PoseCov::from_diagonal(&Vector3::new(st * st, st * st, sh * sh))
    } else {
        PoseCov::zeros()
    };
    let mut align = vec![vec![NoisyTransform::exact(Pose2::IDENTITY, 0); n]; n];
    let mut inject_rng = stream(cfg.rng_seed, INJECTION_STREAM);
    for i in 0..n {
        for j in i + 1..n {
            let truth = true_alignment(&robots[i], &robots[j]);
            let err = match (gt_loc, cfg.error_injection) {
                (false, Some(e)) => inject_alignment_error(e.sigma_t_m, &mut inject_rng),
                _ => Pose2::IDENTITY,
            };
            let a = NoisyTransform::new(err.compose(&truth), init_cov, 0);
            align[j][i] = a.inverse();
            align[i][j] = a;
        }
    }

    let mut log = RunLog {
        meta: meta(cfg, mode),
        ..RunLog::default()
    };
    let mut windows: BTreeMap<(usize, usize), VecDeque<StoredCoDetection>> = BTreeMap::new();

    for k in 0..frames {
        let t = k as f64 * dt;
        for (i, r) in robots.iter_mut().enumerate() {
            let w = robot_pose(&cfg.robots[i], t);
            if k > 0 {
                if gt_loc {
                    r.est = r.origin.inverse().compose(&w);
                } else {
                    let inc = r.true_pose.inverse().compose(&w);
                    let step = step_odometry(&inc, &cfg.noise.odom, &mut r.rng_odom);
                    (r.est, r.sigma) = integrate(&r.est, &r.sigma, &step);
                }
            }
            r.true_pose = w;
        }
        if gt_loc {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        align[i][j] =
                            NoisyTransform::exact(true_alignment(&robots[i], &robots[j]), k);
                    }
                }
            }
        }

        let mut peds = Vec::with_capacity(cfg.pedestrians.len());
        for (id, p) in cfg.pedestrians.iter().enumerate() {
            let (pos, heading) = walk(p, t);
            peds.push(pos);
            log.ground_truth.push(GtRow {
                frame: k,
                kind: "pedestrian".into(),
                id: id as u64,
                x: pos.x,
                y: pos.y,
                theta: heading,
            });
        }
        for (id, r) in robots.iter().enumerate() {
            log.ground_truth.push(GtRow {
                frame: k,
                kind: "robot".into(),
                id: id as u64,
                x: r.true_pose.x,
                y: r.true_pose.y,
                theta: r.true_pose.theta,
            });
        }

        let mut track_ms = vec![0.0; n];
        let mut meas = Vec::with_capacity(n);
        let mut assocs = Vec::with_capacity(n);
        for (i, r) in robots.iter_mut().enumerate() {
            let view = RobotView {
                id: i,
                true_pose: r.true_pose,
                est_pose: r.est,
                sigma: r.sigma,
                fov: &cfg.robots[i].fov,
            };
            let z = detect_pedestrians(
                &view,
                &peds,
                &cfg.noise.detection,
                cfg.tracking.use_pose_cov,
                k,
                &mut r.rng_det,
            );
            for p in detect_landmarks(&view, &landmarks, &cfg.noise.landmark, &mut r.rng_lmk) {
                r.map.observe(p, k, cfg.realign.merge_radius_m);
            }
            r.map.prune(k, cfg.realign.map_horizon_frames);
            let started = Instant::now();
            assocs.push(r.tracker.associate(&z));
            track_ms[i] += started.elapsed().as_secs_f64() * 1e3;
            meas.push(z);
        }

        let share_maps = matches!(mode, RealignMode::Static | RealignMode::Auto)
            && schedule_map_shares(k, cfg.realign.map_share_hz, cfg.frame_rate_hz);
        let mut outboxes: Vec<Vec<Envelope>> = vec![Vec::new(); n];
        for (i, r) in robots.iter().enumerate() {
            let started = Instant::now();
            for j in graph.neighbors(i) {
                let a = if use_align_cov {
                    align[i][j]
                } else {
                    align[i][j].without_covariance()
                };
                for m in r.tracker.outgoing(&meas[i], &assocs[i], &a, k)? {
                    outboxes[i].push(Envelope {
                        to: Recipient::Robot(j),
                        payload: Message::Info(m),
                    });
                }
            }
            track_ms[i] += started.elapsed().as_secs_f64() * 1e3;
            if share_maps {
                outboxes[i].push(Envelope {
                    to: Recipient::Neighbors,
                    payload: Message::Map(r.map.clone()),
                });
            }
        }
        let mailbox = exchange_round(&outboxes, &graph)?;

        let mut maps_in: Vec<BTreeMap<usize, LandmarkMap>> = vec![BTreeMap::new(); n];
        for (i, r) in robots.iter_mut().enumerate() {
            let mut infos: Vec<InfoMessage> = Vec::new();
            for d in mailbox.inbox(i) {
                match &d.payload {
                    Message::Info(m) => infos.push(m.clone()),
                    Message::Map(m) => {
                        maps_in[i].insert(d.sender, m.clone());
                    }
                    _ => {}
                }
            }
            let started = Instant::now();
            let report = r.tracker.fuse(&meas[i], &assocs[i], &infos, k)?;
            track_ms[i] += started.elapsed().as_secs_f64() * 1e3;
            for ev in report.co_detections.iter().filter(|e| i < e.sender) {
                let j = ev.sender;
                windows
                    .entry((i, j))
                    .or_default()
                    .push_back(StoredCoDetection {
                        frame: k,
                        state: ev.state,
                        local: ev.local,
                        remote_raw: align[j][i].pose.inverse().transform_point(ev.remote),
                    });
            }
        }

        let mut corrections = vec![Correction::default(); n];
        let mut applied: BTreeMap<(usize, usize), (AlignMethod, Correction)> = BTreeMap::new();
        let mut align_ms = vec![0.0; n];
        if mode != RealignMode::Off {
            let mut responses: Vec<Vec<Envelope>> = vec![Vec::new(); n];
            for i in 0..n {
                for j in graph.neighbors(i).into_iter().filter(|&j| j > i) {
                    let started = Instant::now();
                    let win = windows.entry((i, j)).or_default();
                    while win
                        .front()
                        .is_some_and(|s| s.frame + cfg.realign.window_frames <= k)
                    {
                        win.pop_front();
                    }
                    let map_j = maps_in[i].get(&j);
                    let method =
                        select_realign_mode(win.len(), cfg.realign.tau_eta, mode, map_j.is_some());
                    // Responses carry the j→i transform that robot j uses.
                    let result = match (method, map_j) {
                        (Some(AlignMethod::Static), Some(map_j)) => {
                            align_static(&robots[i].map, map_j, &align[i][j], k, &params).map(|r| {
                                AlignmentResult {
                                    transform: r.transform.inverse(),
                                    ..r
                                }
                            })
                        }
                        (Some(AlignMethod::Dynamic), _) => {
                            let a_ji = align[j][i];
                            let pairs: Vec<CoDetection> = win
                                .iter()
                                .map(|s| CoDetection {
                                    frame: s.frame,
                                    state: s.state,
                                    local: s.local,
                                    remote: a_ji.pose.transform_point(s.remote_raw),
                                })
                                .collect();
                            align_dynamic(&pairs, &a_ji, k, &params)
                        }
                        _ => continue,
                    };
                    align_ms[i] += started.elapsed().as_secs_f64() * 1e3;
                    // A failed realignment keeps the previous estimate.
                    if let Ok(res) = result {
                        responses[i].push(Envelope {
                            to: Recipient::Robot(j),
                            payload: Message::AlignmentResponse(res),
                        });
                    }
                }
            }
            let replies = exchange_round(&responses, &graph)?;
            for j in 0..n {
                for d in replies.inbox(j) {
                    if let Message::AlignmentResponse(res) = &d.payload {
                        let i = d.sender;
                        align[j][i] = res.transform;
                        align[i][j] = res.transform.inverse();
                        corrections[i] = max_correction(corrections[i], res.correction);
                        corrections[j] = max_correction(corrections[j], res.correction);
                        applied.insert((i.min(j), i.max(j)), (res.method, res.correction));
                    }
                }
            }
        }
        if cfg.realign.reactive_gate && mode != RealignMode::Off {
            for (r, c) in robots.iter_mut().zip(&corrections) {
                r.tracker.gate = adapt_gate(&r.tracker.gate, c, &cfg.tracking.gate);
            }
        }

        for (i, r) in robots.iter().enumerate() {
            let to_world = r.local_to_world();
            for tr in &r.tracker.bank.tracks {
                let w = to_world.transform_point(tr.estimated_position());
                log.tracks.push(TrackRow {
                    frame: k,
                    robot: i,
                    track_id: tr.id.to_string(),
                    status: tr.status.as_str().to_string(),
                    x: tr.estimate[0],
                    y: tr.estimate[1],
                    vx: tr.estimate[2],
                    vy: tr.estimate[3],
                    trace_p: tr.p.trace(),
                    world_x: w.x,
                    world_y: w.y,
                });
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let est = align[i][j];
                let truth = true_alignment(&robots[i], &robots[j]);
                let (method, corr) = applied
                    .get(&(i, j))
                    .map_or(("hold", Correction::default()), |(m, c)| (m.as_str(), *c));
                log.alignments.push(AlignmentRow {
                    frame: k,
                    i,
                    j,
                    est_x: est.pose.x,
                    est_y: est.pose.y,
                    est_theta: est.pose.theta,
                    true_x: truth.x,
                    true_y: truth.y,
                    true_theta: truth.theta,
                    var_x: est.cov[(0, 0)],
                    var_y: est.cov[(1, 1)],
                    var_theta: est.cov[(2, 2)],
                    method: method.to_string(),
                    corr_t: corr.trans_m,
                    corr_r: corr.rot_rad,
                });
            }
        }
        if cfg.timings {
            for i in 0..n {
                log.timings.push(TimingRow {
                    frame: k,
                    robot: i,
                    stage: "tracking".into(),
                    ms: track_ms[i],
                });
                if mode != RealignMode::Off {
                    log.timings.push(TimingRow {
                        frame: k,
                        robot: i,
                        stage: "alignment".into(),
                        ms: align_ms[i],
                    });
                }
            }
        }
    }
    Ok(log)
}
