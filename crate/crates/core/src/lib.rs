//! Downlink massive MIMO with dual-polarized antennas: channel model, MMSE
//! estimation, MR/ZF precoding and spectral-efficiency evaluation.

pub mod channel;
pub mod correlation;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod numerics;
pub mod precoding;
pub mod rng;
pub mod scenario;
pub mod se;
pub mod units;

pub use error::{Error, Result};
