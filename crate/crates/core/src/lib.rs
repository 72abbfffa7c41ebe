//! Multi-robot tracking of dynamic objects with frame realignment.

pub mod error;
pub mod geometry;
pub mod metrics;
pub mod network;
pub mod registration;
pub mod simulation;
pub mod sweep;
pub mod tracking;

pub use error::{Error, Result};
