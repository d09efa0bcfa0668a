//! H∞ state-feedback synthesis and a closed-loop launch-vehicle pitch
//! autopilot simulator.
//!
//! The crate is layered bottom-up:
//!
//! - [`care`] and [`norm`]: γ-level Riccati solve, residual check, LQR limit,
//!   γ bisection and H∞ norm computation on dense matrices.
//! - [`vehicle`]: pitch-channel coefficients, the tracking-error plant and
//!   its command-driven forcing.
//! - [`actuators`]: rate-limited thrust-vector servo and rate gyro.
//! - [`controller`]: design points, gain extraction and the weighting
//!   calibration against the published design matrices.
//! - [`simulator`]: fixed-step closed-loop integration, traces and metrics.
//! - [`cli`]: the `hinf-autopilot` command-line surface.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuators;
pub mod care;
pub mod cli;
pub mod controller;
pub mod error;
pub mod linalg;
pub mod norm;
pub mod simulator;
pub mod vehicle;

pub use error::{Error, Result};
