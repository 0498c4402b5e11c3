//! Fixed-step co-simulation master.
//!
//! Explicit coupling with a one-step exchange delay: the operator reads the
//! feedback of step `k` and its controls act on the machine over
//! `[t_k, t_k + dt)`. Only [`FeedbackFrame`] and [`ControlSignals`] cross the
//! boundary, so any [`Plant`] implementation can be swapped in.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{ControlSignals, FeedbackFrame};
use crate::operator::{operator_init, OperatorConfig, OperatorError, Phase};
use crate::plant::{observe, plant_step, KinematicLoader, MachineParams, PlantError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CosimError {
    #[error("dt and t_max must be positive and finite (dt = {dt}, t_max = {t_max})")]
    BadTiming { dt: f64, t_max: f64 },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Anything that answers controls with feedback over the black-box channel.
pub trait Plant {
    fn observe(&self) -> FeedbackFrame;
    fn step(&mut self, u: &ControlSignals, dt: f64);
}

impl Plant for KinematicLoader {
    fn observe(&self) -> FeedbackFrame {
        observe(&self.state)
    }

    fn step(&mut self, u: &ControlSignals, dt: f64) {
        self.state = plant_step(&self.params, &self.state, u, dt);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub phase: Phase,
    pub u: ControlSignals,
    pub fb: FeedbackFrame,
    /// Travelled distance, the integral of |v| up to `t`.
    pub s_cum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done,
    Timeout,
    Failed(OperatorError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub config_digest: String,
    pub dt: f64,
    pub version: String,
    pub dump_point: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
    pub outcome: Outcome,
}

impl Trace {
    pub fn is_done(&self) -> bool {
        self.outcome == Outcome::Done
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct phases in order of first appearance.
    pub fn phase_sequence(&self) -> Vec<Phase> {
        let mut seq: Vec<Phase> = Vec::new();
        for r in &self.records {
            if seq.last() != Some(&r.phase) {
                seq.push(r.phase);
            }
        }
        seq
    }
}

/// SHA-256 over the full parameter set of a run.
pub fn config_digest(mp: &MachineParams, oc: &OperatorConfig, dt: f64, t_max: f64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("{mp:?}|{oc:?}|{dt:?}|{t_max:?}").as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Runs one cycle with the kinematic loader starting at the dig point with the
/// bucket lowered.
pub fn run_cycle(mp: &MachineParams, oc: &OperatorConfig, dt: f64, t_max: f64) -> Result<Trace, CosimError> {
    let phi0 = 0f64.clamp(mp.tilt_min, mp.tilt_max);
    let plant = KinematicLoader::new(*mp, oc.layout.dig_pose(), 0.0, phi0)?;
    run_with_plant(plant, oc, dt, t_max, config_digest(mp, oc, dt, t_max))
}

/// The master loop over an arbitrary plant.
pub fn run_with_plant<P: Plant>(
    mut plant: P,
    oc: &OperatorConfig,
    dt: f64,
    t_max: f64,
    config_digest: String,
) -> Result<Trace, CosimError> {
    if !(dt > 0.0 && dt.is_finite() && t_max > 0.0 && t_max.is_finite()) {
        return Err(CosimError::BadTiming { dt, t_max });
    }
    let mut operator = operator_init(oc)?;
    let mut records = Vec::new();
    let mut s_cum = 0.0;
    let mut k: u64 = 0;
    let outcome = loop {
        let t = k as f64 * dt;
        if t > t_max {
            break Outcome::Timeout;
        }
        let fb = plant.observe();
        let u = match operator.tick(oc, &fb, t, dt) {
            Ok(u) => u,
            Err(e) => break Outcome::Failed(e),
        };
        records.push(TraceRecord {
            t,
            phase: operator.phase,
            u,
            fb,
            s_cum,
        });
        if operator.phase == Phase::Done {
            break Outcome::Done;
        }
        plant.step(&u, dt);
        s_cum += fb.v.abs() * dt;
        k += 1;
    };
    Ok(Trace {
        meta: TraceMeta {
            config_digest,
            dt,
            version: env!("CARGO_PKG_VERSION").to_string(),
            dump_point: oc.layout.dump_point(),
        },
        records,
        outcome,
    })
}
