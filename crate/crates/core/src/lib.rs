//! Deterministic simulation of a wheel loader's short loading cycle.
//!
//! An event-driven operator (a finite state machine over the cycle phases)
//! drives a simplified articulated loader through a narrow black-box channel:
//! the operator only ever sees a [`channel::FeedbackFrame`] and only ever
//! emits [`channel::ControlSignals`].
//!
//! - [`geom`]: V-pattern path synthesis, bearing, approach-path estimation.
//! - [`plant`]: kinematic articulated loader with rate-limited actuators.
//! - [`operator`]: the phase state machine and reversing-point estimator.
//! - [`cosim`]: fixed-step co-simulation master producing a [`cosim::Trace`].
//! - [`metrics`]: diagnostic series, KPIs, CSV and SVG output.
//! - [`scenario`] and [`cli`]: configuration files and the `sim` commands.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod cosim;
pub mod geom;
pub mod metrics;
pub mod operator;
pub mod plant;
pub mod scenario;
