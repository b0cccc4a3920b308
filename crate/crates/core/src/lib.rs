//! Federated training of per-vehicle battery-consumption models.
//!
//! Each fleet member fits a linear ARX predictor by online SGD on its own
//! trip. A sliding-window detector flags anomalous inputs; an anomalous
//! member stops learning from its own sample and instead advances by the
//! mean of peer learned results whose direction is similar enough to its
//! last one. Five baseline strategies run on the same loop for comparison.

pub mod anomaly;
pub mod arx;
pub mod data;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod metrics;
pub mod sharing;

pub use error::{Error, ErrorClass, Result};
