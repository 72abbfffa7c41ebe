use crate::registration::Correction;
use serde::{Deserialize, Serialize};

/// Association gate on the squared Mahalanobis distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateState {
    pub tau: f64,
    pub tau_base: f64,
}

impl GateState {
    pub fn new(tau_base: f64) -> Self {
        Self {
            tau: tau_base,
            tau_base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateParams {
    pub alpha_t: f64,
    pub alpha_theta: f64,
    pub decay: f64,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            alpha_t: 2.0,
            alpha_theta: 10.0,
            decay: 0.9,
        }
    }
}

/// Inflates the gate immediately after a large realignment correction and
/// relaxes it geometrically back toward the baseline.
pub fn adapt_gate(g: &GateState, correction: &Correction, params: &GateParams) -> GateState {
    let candidate = g.tau_base
        * (1.0 + params.alpha_t * correction.trans_m + params.alpha_theta * correction.rot_rad);
    let relaxed = g.tau_base + params.decay * (g.tau - g.tau_base);
    GateState {
        tau: candidate.max(relaxed).max(g.tau_base),
        tau_base: g.tau_base,
    }
}
