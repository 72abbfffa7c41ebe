use super::assignment::{hungarian, FORBIDDEN};
use super::kcf::{kcf_update, to_information, Information};
use super::model::{mahalanobis, predict};
use super::{
    manage_tracks, GateState, InfoMessage, Measurement, MotionModel, Track, TrackBank, TrackId,
    TrackParams,
};
use crate::error::Result;
use crate::geometry::{propagate_into_neighbor, transform_point, NoisyTransform, Point2};
use nalgebra::{Matrix4, Vector2, Vector4};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// Measurement index assigned to each track, if any.
    pub track_to_meas: Vec<Option<usize>>,
    pub unmatched_measurements: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
}

/// Global-nearest-neighbor association on the squared Mahalanobis distance.
/// Pairs beyond the gate, or with a singular innovation covariance, are
/// forbidden.
pub fn gnn_associate(
    measurements: &[Measurement],
    tracks: &[Track],
    gate: &GateState,
    model: &MotionModel,
) -> Association {
    let cost: Vec<Vec<f64>> = tracks
        .iter()
        .map(|t| {
            measurements
                .iter()
                .map(|z| match mahalanobis(z, t, model) {
                    Ok(d) if d <= gate.tau => d,
                    _ => FORBIDDEN,
                })
                .collect()
        })
        .collect();
    let mut track_to_meas = vec![None; tracks.len()];
    let mut used = vec![false; measurements.len()];
    if !measurements.is_empty() {
        for (r, c) in hungarian(&cost).pairs() {
            track_to_meas[r] = Some(c);
            used[c] = true;
        }
    }
    Association {
        unmatched_measurements: (0..measurements.len()).filter(|&m| !used[m]).collect(),
        unmatched_tracks: (0..tracks.len())
            .filter(|&t| track_to_meas[t].is_none())
            .collect(),
        track_to_meas,
    }
}

/// A neighbor measurement and a local measurement of the same track in the
/// same frame, both in the local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoDetectionEvent {
    pub sender: usize,
    pub track_id: TrackId,
    pub frame: u64,
    pub state: Vector4<f64>,
    pub local: Point2,
    pub remote: Point2,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FuseReport {
    pub co_detections: Vec<CoDetectionEvent>,
    pub adopted: usize,
    pub spawned: usize,
}

/// One robot's tracking pipeline.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub robot: usize,
    pub bank: TrackBank,
    pub gate: GateState,
    pub model: MotionModel,
    pub params: TrackParams,
}

impl Tracker {
    pub fn new(robot: usize, model: MotionModel, tau_base: f64, params: TrackParams) -> Self {
        Self {
            robot,
            bank: TrackBank::new(robot),
            gate: GateState::new(tau_base),
            model,
            params,
        }
    }

    pub fn associate(&self, measurements: &[Measurement]) -> Association {
        gnn_associate(measurements, &self.bank.tracks, &self.gate, &self.model)
    }

    /// Messages for one neighbor: one per confirmed track, with the prior and
    /// any associated measurement expressed in the neighbor's frame through
    /// `alignment`.
    pub fn outgoing(
        &self,
        measurements: &[Measurement],
        assoc: &Association,
        alignment: &NoisyTransform,
        frame: u64,
    ) -> Result<Vec<InfoMessage>> {
        let rot = alignment.pose.rotation();
        let mut out = Vec::new();
        for (idx, t) in self.bank.tracks.iter().enumerate() {
            if !t.is_confirmed() {
                continue;
            }
            let pos = transform_point(&alignment.pose, t.position());
            let vel = rot * Vector2::new(t.x[2], t.x[3]);
            let prior = Vector4::new(pos.x, pos.y, vel[0], vel[1]);
            let (u, big_u) = match assoc.track_to_meas.get(idx).copied().flatten() {
                Some(m) => {
                    let z = &measurements[m];
                    let (zj, rj) = propagate_into_neighbor(alignment, z.pos, &z.cov);
                    to_information(zj, &rj, &self.model)?
                }
                None => (Vector4::zeros(), Matrix4::zeros()),
            };
            out.push(InfoMessage {
                track_id: t.id,
                prior,
                u,
                big_u,
                sender: self.robot,
                stamp: frame,
            });
        }
        Ok(out)
    }

    /// Fuses local measurements and neighbor messages into the track bank
    /// and runs the lifecycle step. Afterwards every track holds its prior
    /// for the next frame.
    pub fn fuse(
        &mut self,
        measurements: &[Measurement],
        assoc: &Association,
        inbox: &[InfoMessage],
        frame: u64,
    ) -> Result<FuseReport> {
        let existing = self.bank.tracks.len();
        let routes = self
            .bank
            .reconcile(inbox, self.gate.tau, &self.model, &self.params);
        let mut report = FuseReport {
            adopted: self.bank.tracks.len() - existing,
            ..FuseReport::default()
        };

        let mut routed: Vec<Vec<&InfoMessage>> = vec![Vec::new(); existing];
        for (msg, route) in inbox.iter().zip(&routes) {
            if let Some(idx) = route {
                routed[*idx].push(msg);
            }
        }

        for idx in 0..existing {
            let track = &self.bank.tracks[idx];
            let mut info = Information::default();
            let local = assoc.track_to_meas.get(idx).copied().flatten();
            if let Some(m) = local {
                let z = &measurements[m];
                let (u, big_u) = to_information(z.pos, &z.cov, &self.model)?;
                info.add(&u, &big_u);
            }
            let mut priors = Vec::with_capacity(routed[idx].len());
            for msg in &routed[idx] {
                info.add(&msg.u, &msg.big_u);
                priors.push(msg.prior);
                if let (Some(m), Some((remote, _))) = (local, msg.measurement()) {
                    report.co_detections.push(CoDetectionEvent {
                        sender: msg.sender,
                        track_id: track.id,
                        frame,
                        state: track.x,
                        local: measurements[m].pos,
                        remote,
                    });
                }
            }
            let updated = kcf_update(track, &info, &priors, &self.model, self.params.gain_cap)?;
            self.bank.tracks[idx] = updated;
        }
        for idx in existing..self.bank.tracks.len() {
            self.bank.tracks[idx] = predict(&self.bank.tracks[idx], &self.model);
        }

        let unmatched: Vec<Measurement> = assoc
            .unmatched_measurements
            .iter()
            .map(|&m| measurements[m])
            .collect();
        report.spawned = unmatched.len();
        manage_tracks(&mut self.bank, &unmatched, &self.model, &self.params);
        if self.params.coalesce {
            self.bank.coalesce(self.gate.tau);
        }
        self.bank.sort();
        Ok(report)
    }

    /// Single-robot frame: associate, fuse, manage.
    pub fn step_alone(&mut self, measurements: &[Measurement], frame: u64) -> Result<Association> {
        let assoc = self.associate(measurements);
        self.fuse(measurements, &assoc, &[], frame)?;
        Ok(assoc)
    }
}
