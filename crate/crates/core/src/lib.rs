//! Rate-splitting multiple access (RSMA) downlink from a UAV aerial base
//! station (aBS) to two ground users.
//!
//! * [`channel`] — air-to-ground large-scale and Rician small-scale models.
//! * [`ratecore`] — SINR, rate, MSE and augmented-WMSE algebra.
//! * [`solver`] — barrier interior-point solver for the convex precoder
//!   subproblem.
//! * [`optimizer`] — WMMSE alternating optimization for RSMA plus the SDMA
//!   and NOMA baselines.
//! * [`placement`] — aBS placement strategies, including the per-realization
//!   grid search.
//! * [`harness`] — Monte-Carlo sweeps, config files, CSV/SVG output and the
//!   self-check suite behind the `rsma-uav` binary.

pub mod channel;
pub mod error;
pub mod harness;
pub mod optimizer;
pub mod parallel;
pub mod placement;
pub mod ratecore;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
