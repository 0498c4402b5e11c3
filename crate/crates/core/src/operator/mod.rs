//! Event-driven operator model.
//!
//! A finite state machine over the cycle phases. Each tick it reads one
//! [`FeedbackFrame`], takes at most one phase transition, and emits the
//! [`ControlSignals`] of the phase it ends up in. Phase substates are kept as
//! flags on [`OperatorState`] rather than as separate phases.
//!
//! Phase graph: `Init -> 1a -> 2 -> (2a) -> 3 -> 4 -> 5 -> (5a) -> 6 -> Done`.

mod estimator;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use thiserror::Error;

pub use estimator::{estimate_height_at_arrival, EstimatorState};

use crate::channel::{ControlSignals, Direction, FeedbackFrame};
use crate::geom::{
    aims_at_origin, approach_solution, bearing_to_origin, normalize_angle, plan_aim_at_origin, ApproachSolution,
    GeomError, Pose, VPathPlan, WorkplaceLayout,
};

const H_TOL: f64 = 0.01;
const PHI_TOL: f64 = 0.01;
const IMPLEMENT_GAIN: f64 = 20.0;
/// Heading within this of perpendicular counts as aligned with the approach.
const ALIGN_TOL: f64 = 0.02;
const PHASE_6_LIFT: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("invalid operator config {name}: {reason}")]
    InvalidConfig { name: &'static str, reason: &'static str },
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("phase 5a timed out after {elapsed:.2} s: bucket height {h:.3} m never reached {h_empty:.3} m")]
    ExtraLiftTimeout { elapsed: f64, h: f64, h_empty: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Init,
    TiltBack,
    LeavingBank,
    TurnLimited,
    Retardation,
    Reversing,
    TowardReceiver,
    ExtraLift,
    Emptying,
    Done,
}

impl Phase {
    pub const ALL: [Phase; 10] = [
        Phase::Init,
        Phase::TiltBack,
        Phase::LeavingBank,
        Phase::TurnLimited,
        Phase::Retardation,
        Phase::Reversing,
        Phase::TowardReceiver,
        Phase::ExtraLift,
        Phase::Emptying,
        Phase::Done,
    ];

    /// Short label as used on cycle diagrams: `0`, `1a`, `2`, ..., `done`.
    pub fn label(self) -> &'static str {
        match self {
            Phase::Init => "0",
            Phase::TiltBack => "1a",
            Phase::LeavingBank => "2",
            Phase::TurnLimited => "2a",
            Phase::Retardation => "3",
            Phase::Reversing => "4",
            Phase::TowardReceiver => "5",
            Phase::ExtraLift => "5a",
            Phase::Emptying => "6",
            Phase::Done => "done",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label() == label)
    }

    /// Position in the cycle ordering.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// What an experienced operator knows about the machine's geometry and
/// implement range. Nothing here is read from the machine at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineKnowledge {
    pub l_f: f64,
    pub l_r: f64,
    pub gamma_max: f64,
    /// Articulation slew rate at full steering, rad/s.
    pub gamma_rate: f64,
    pub tilt_min: f64,
    pub tilt_max: f64,
}

impl MachineKnowledge {
    pub fn min_turning_radius(&self) -> f64 {
        crate::plant::turning_radius(self.gamma_max, self.l_f, self.l_r)
    }

    fn articulation_for(&self, radius: f64) -> Option<f64> {
        crate::plant::articulation_for_radius(radius, self.l_f, self.l_r, self.gamma_max).ok()
    }

    /// Heading change still to come if the articulation is straightened now
    /// at full steering rate. Curvature falls roughly linearly to zero, so the
    /// swing is half the current yaw rate over the unwinding time.
    pub fn unwinding_swing(&self, v: f64, gamma: f64) -> f64 {
        let yaw_rate = v * gamma.sin() / (self.l_f + self.l_r * gamma.cos());
        0.5 * yaw_rate * gamma.abs() / self.gamma_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConfig {
    pub layout: WorkplaceLayout,
    pub machine: MachineKnowledge,
    /// Bucket height sufficient for emptying, m.
    pub h_empty: f64,
    pub h_init: f64,
    pub phi_init: f64,
    /// Throttle held during initialisation to set the engine speed.
    pub init_throttle: f64,
    /// Speed below which forward may be engaged, m/s.
    pub v_safe: f64,
    pub aim_tol: f64,
    /// Estimator memory, s.
    pub ratio_window: f64,
    /// Distance from the receiver inside which the bucket is aligned, m.
    pub margin: f64,
    pub brake_level: f64,
    pub approach_throttle: f64,
    pub approach_speed: f64,
    /// Deceleration the operator expects while retarding, m/s^2.
    pub stopping_decel: f64,
    /// Steering lever per radian of articulation error.
    pub steer_gain: f64,
    /// Articulation per radian of bearing error once the aim is captured.
    pub bearing_gain: f64,
    pub empty_creep_throttle: f64,
    pub empty_duration: f64,
    pub extra_lift_timeout: f64,
}

impl OperatorConfig {
    /// Defaults for the given layout and machine.
    pub fn new(layout: WorkplaceLayout, machine: MachineKnowledge) -> Self {
        Self {
            layout,
            machine,
            h_empty: 3.2,
            h_init: 0.5,
            phi_init: 0.0,
            init_throttle: 0.3,
            v_safe: 0.5,
            aim_tol: 2f64.to_radians(),
            ratio_window: 1.0,
            margin: 1.5,
            brake_level: 0.5,
            approach_throttle: 0.4,
            approach_speed: 0.45,
            stopping_decel: 2.0,
            steer_gain: 10.0,
            bearing_gain: 2.0,
            empty_creep_throttle: 0.25,
            empty_duration: 3.0,
            extra_lift_timeout: 30.0,
        }
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        let positive = [
            ("h_empty", self.h_empty),
            ("v_safe", self.v_safe),
            ("aim_tol", self.aim_tol),
            ("ratio_window", self.ratio_window),
            ("margin", self.margin),
            ("approach_speed", self.approach_speed),
            ("stopping_decel", self.stopping_decel),
            ("steer_gain", self.steer_gain),
            ("bearing_gain", self.bearing_gain),
            ("empty_duration", self.empty_duration),
            ("extra_lift_timeout", self.extra_lift_timeout),
            ("machine.gamma_rate", self.machine.gamma_rate),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(OperatorError::InvalidConfig {
                    name,
                    reason: "must be positive and finite",
                });
            }
        }
        let unit = [
            ("init_throttle", self.init_throttle),
            ("brake_level", self.brake_level),
            ("approach_throttle", self.approach_throttle),
            ("empty_creep_throttle", self.empty_creep_throttle),
        ];
        for (name, value) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(OperatorError::InvalidConfig {
                    name,
                    reason: "must lie in [0, 1]",
                });
            }
        }
        if !(self.h_init >= 0.0 && self.h_init.is_finite()) {
            return Err(OperatorError::InvalidConfig {
                name: "h_init",
                reason: "must be non-negative",
            });
        }
        let m = &self.machine;
        if !(m.tilt_min < m.tilt_max) {
            return Err(OperatorError::InvalidConfig {
                name: "tilt_range",
                reason: "tilt_min must be below tilt_max",
            });
        }
        if !(m.tilt_min..=m.tilt_max).contains(&self.phi_init) {
            return Err(OperatorError::InvalidConfig {
                name: "phi_init",
                reason: "must lie within the tilt range",
            });
        }
        if !(m.l_f > 0.0 && m.l_r > 0.0 && m.gamma_max > 0.0 && m.gamma_max < FRAC_PI_2) {
            return Err(OperatorError::InvalidConfig {
                name: "machine",
                reason: "steering geometry must be positive with gamma_max below 90 degrees",
            });
        }
        Ok(())
    }
}

/// Approach onto the receiver as seen from a pose, in the local frame the
/// arc-plus-line formulas expect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachView {
    pub solution: ApproachSolution,
    /// Heading relative to the receiver-parallel axis, clamped below pi/2.
    pub theta: f64,
    /// `+1` when the machine is on the far side of the approach line from
    /// the bank, `-1` otherwise.
    pub side: f64,
    /// Unclamped local heading; at or above pi/2 means aligned or past it.
    pub raw_theta: f64,
}

impl ApproachView {
    /// Path length to the receiver, walking straight first when the arc
    /// alone would overshoot.
    pub fn path_length(&self) -> f64 {
        let s = &self.solution;
        if s.l_d >= 0.0 {
            return s.l;
        }
        let (sin, cos) = self.theta.sin_cos();
        let straight = -s.l_d;
        let r = (s.r_c - straight * cos / (1.0 - sin)).max(0.0);
        straight + r * (FRAC_PI_2 - self.theta)
    }
}

/// Computes the approach from `pose` (driving forward along its heading) to
/// the dump point of `layout`.
pub fn approach_from(pose: &Pose, layout: &WorkplaceLayout) -> ApproachView {
    let side = if pose.z >= layout.b { 1.0 } else { -1.0 };
    let (sin, cos) = pose.theta.sin_cos();
    let toward_receiver = -cos;
    let toward_line = -side * sin;
    let raw_theta = toward_receiver.atan2(toward_line);
    let theta = raw_theta.clamp(0.0, FRAC_PI_2 - ALIGN_TOL);
    let d = (pose.z - layout.b).abs().max(1e-9);
    let z = pose.x.max(0.0);
    let solution = if raw_theta >= FRAC_PI_2 - ALIGN_TOL {
        // aligned or turned past the approach line: no arc left to drive,
        // count the lateral offset as extra distance
        ApproachSolution {
            r_c: f64::INFINITY,
            l_c: 0.0,
            l_d: z,
            l: z + d,
        }
    } else {
        approach_solution(d, theta, z).unwrap_or(ApproachSolution {
            r_c: 0.0,
            l_c: 0.0,
            l_d: z,
            l: z,
        })
    };
    ApproachView {
        solution,
        theta,
        side,
        raw_theta,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorState {
    pub phase: Phase,
    pub plan: VPathPlan,
    pub estimator: EstimatorState,
    pub phase_entry_time: f64,
    pub reversing_pose: Option<Pose>,
    pub aim_captured: bool,
    pub receiver_passed: bool,
    /// Distance travelled as perceived by the operator, m.
    pub odometer: f64,
    pub last_approach: Option<ApproachView>,
    /// Last predicted bucket height at arrival, m.
    pub last_prediction: Option<f64>,
}

pub fn operator_init(config: &OperatorConfig) -> Result<OperatorState, OperatorError> {
    config.validate()?;
    let plan = plan_aim_at_origin(config.layout.a, config.layout.b)?;
    Ok(OperatorState {
        phase: Phase::Init,
        plan,
        estimator: EstimatorState::new(config.ratio_window),
        phase_entry_time: 0.0,
        reversing_pose: None,
        aim_captured: false,
        receiver_passed: false,
        odometer: 0.0,
        last_approach: None,
        last_prediction: None,
    })
}

/// Pure form of [`OperatorState::tick`].
pub fn operator_tick(
    state: &OperatorState,
    config: &OperatorConfig,
    fb: &FeedbackFrame,
    t: f64,
    dt: f64,
) -> Result<(OperatorState, ControlSignals), OperatorError> {
    let mut next = state.clone();
    let u = next.tick(config, fb, t, dt)?;
    Ok((next, u))
}

fn steer_toward(config: &OperatorConfig, fb: &FeedbackFrame, target: f64) -> f64 {
    let target = target.clamp(-config.machine.gamma_max, config.machine.gamma_max);
    (config.steer_gain * (target - fb.gamma)).clamp(-1.0, 1.0)
}

fn lift_until_empty_height(config: &OperatorConfig, fb: &FeedbackFrame) -> f64 {
    if fb.h < config.h_empty {
        1.0
    } else {
        0.0
    }
}

/// Articulation that puts the bucket (front frame) parallel to the receiver.
fn parallel_articulation(fb: &FeedbackFrame) -> f64 {
    normalize_angle(PI - fb.pose.theta)
}

impl OperatorState {
    /// One operator decision: update bookkeeping, take at most one phase
    /// transition, then emit the controls of the resulting phase.
    pub fn tick(
        &mut self,
        config: &OperatorConfig,
        fb: &FeedbackFrame,
        t: f64,
        dt: f64,
    ) -> Result<ControlSignals, OperatorError> {
        self.odometer += fb.v.abs() * dt;
        self.observe(config, fb, t);

        if let Some(next) = self.transition(config, fb, t)? {
            if next == Phase::Reversing {
                self.reversing_pose = Some(fb.pose);
            }
            self.phase = next;
            self.phase_entry_time = t;
        }
        Ok(self.controls(config, fb, t).saturated())
    }

    fn in_leaving_bank(&self) -> bool {
        matches!(self.phase, Phase::LeavingBank | Phase::TurnLimited)
    }

    fn observe(&mut self, config: &OperatorConfig, fb: &FeedbackFrame, t: f64) {
        if !self.in_leaving_bank() {
            return;
        }
        if !self.aim_captured {
            // start straightening early so the heading settles on the bearing
            let swing = config.machine.unwinding_swing(fb.v, fb.gamma);
            let settled = Pose::new(fb.pose.x, fb.pose.z, normalize_angle(fb.pose.theta + swing));
            self.aim_captured = aims_at_origin(&settled, config.aim_tol);
        }
        if !self.receiver_passed && fb.pose.z >= config.layout.b {
            self.receiver_passed = true;
        }
        if self.receiver_passed {
            let lifting = fb.h < config.h_empty;
            self.estimator.push(t, self.odometer, fb.h, lifting);
            let view = approach_from(&fb.pose, &config.layout);
            let stopping = fb.v * fb.v / (2.0 * config.stopping_decel);
            let remaining = view.path_length() + stopping;
            self.last_prediction = Some(estimate_height_at_arrival(&self.estimator, fb.h, remaining));
            self.last_approach = Some(view);
        }
    }

    fn turn_feasible(&self, config: &OperatorConfig) -> bool {
        self.last_approach
            .map(|a| a.solution.r_c >= config.machine.min_turning_radius())
            .unwrap_or(false)
    }

    fn lift_ready(&self, config: &OperatorConfig) -> bool {
        self.receiver_passed && self.last_prediction.map(|h| h >= config.h_empty).unwrap_or(false)
    }

    fn transition(&self, config: &OperatorConfig, fb: &FeedbackFrame, t: f64) -> Result<Option<Phase>, OperatorError> {
        let elapsed = t - self.phase_entry_time;
        let next = match self.phase {
            Phase::Init => {
                let h_ok = (fb.h - config.h_init).abs() <= H_TOL;
                let phi_ok = (fb.phi - config.phi_init).abs() <= PHI_TOL;
                (h_ok && phi_ok).then_some(Phase::TiltBack)
            }
            Phase::TiltBack => (fb.phi >= config.machine.tilt_max - PHI_TOL).then_some(Phase::LeavingBank),
            Phase::LeavingBank => {
                if self.lift_ready(config) {
                    if self.turn_feasible(config) {
                        Some(Phase::Retardation)
                    } else {
                        Some(Phase::TurnLimited)
                    }
                } else {
                    None
                }
            }
            Phase::TurnLimited => (self.lift_ready(config) && self.turn_feasible(config)).then_some(Phase::Retardation),
            Phase::Retardation => (fb.v.abs() <= config.v_safe).then_some(Phase::Reversing),
            Phase::Reversing => (fb.v > 0.0).then_some(Phase::TowardReceiver),
            Phase::TowardReceiver => {
                if fb.pose.x <= 0.0 {
                    if fb.h >= config.h_empty {
                        Some(Phase::Emptying)
                    } else {
                        Some(Phase::ExtraLift)
                    }
                } else {
                    None
                }
            }
            Phase::ExtraLift => {
                if fb.h >= config.h_empty {
                    Some(Phase::Emptying)
                } else if elapsed > config.extra_lift_timeout {
                    return Err(OperatorError::ExtraLiftTimeout {
                        elapsed,
                        h: fb.h,
                        h_empty: config.h_empty,
                    });
                } else {
                    None
                }
            }
            Phase::Emptying => {
                let tilted = fb.phi <= config.machine.tilt_min + PHI_TOL;
                (elapsed >= config.empty_duration && tilted).then_some(Phase::Done)
            }
            Phase::Done => None,
        };
        Ok(next)
    }

    fn controls(&self, config: &OperatorConfig, fb: &FeedbackFrame, t: f64) -> ControlSignals {
        match self.phase {
            Phase::Init => self.init_rule(config, fb),
            Phase::TiltBack => self.tilt_back_rule(),
            Phase::LeavingBank | Phase::TurnLimited => self.leaving_bank_rule(config, fb),
            Phase::Retardation => self.retardation_rule(config, fb),
            Phase::Reversing => self.reversing_rule(config, fb),
            Phase::TowardReceiver => self.toward_receiver_rule(config, fb),
            Phase::ExtraLift => self.extra_lift_rule(config, fb),
            Phase::Emptying => self.emptying_rule(config, fb, t),
            Phase::Done => ControlSignals::idle(Direction::Neutral),
        }
    }

    fn init_rule(&self, config: &OperatorConfig, fb: &FeedbackFrame) -> ControlSignals {
        ControlSignals {
            throttle: config.init_throttle,
            lift: IMPLEMENT_GAIN * (config.h_init - fb.h),
            tilt: IMPLEMENT_GAIN * (config.phi_init - fb.phi),
            direction: Direction::Neutral,
            ..Default::default()
        }
    }

    fn tilt_back_rule(&self) -> ControlSignals {
        ControlSignals {
            tilt: 1.0,
            direction: Direction::Forward,
            ..Default::default()
        }
    }

    /// Reverse out of the bank with full lift along the planned arc; once the
    /// machine will aim at the origin after straightening, hold that bearing line.
    fn leaving_bank_rule(&self, config: &OperatorConfig, fb: &FeedbackFrame) -> ControlSignals {
        let target = if self.aim_captured {
            let settled = fb.pose.theta + config.machine.unwinding_swing(fb.v, fb.gamma);
            let error = bearing_to_origin(&fb.pose)
                .map(|beta| normalize_angle(beta - settled))
                .unwrap_or(0.0);
            if error.abs() < 0.5 * config.aim_tol {
                0.0
            } else {
                // reversing: negative articulation turns the heading up
                -config.bearing_gain * error
            }
        } else {
            config
                .machine
                .articulation_for(self.plan.r_a)
                .unwrap_or(config.machine.gamma_max)
        };
        ControlSignals {
            throttle: 1.0,
            steering: steer_toward(config, fb, target),
            lift: lift_until_empty_height(config, fb),
            direction: Direction::Reverse,
            ..Default::default()
        }
    }

    fn retardation_rule(&self, config: &OperatorConfig, fb: &FeedbackFrame) -> ControlSignals {
        ControlSignals {
            brake: config.brake_level,
            steering: steer_toward(config, fb, 0.0),
            lift: lift_until_empty_height(config, fb),
            direction: Direction::Reverse,
            ..Default::default()
        }
    }

    fn reversing_rule(&self, config: &OperatorConfig, fb: &FeedbackFrame) -> ControlSignals {
        ControlSignals {
            throttle: 1.0,
            steering: steer_toward(config, fb, 0.0),
            direction: Direction::Forward,
            ..Default::default()
        }
    }

    fn toward_receiver_rule(&self, config: &OperatorConfig, fb: &FeedbackFrame) -> ControlSignals {
        let x = fb.pose.x;
        let target = if x <= config.margin {
            parallel_articulation(fb)
        } else {
            let view = approach_from(&fb.pose, &config.layout);
            if view.raw_theta >= FRAC_PI_2 - ALIGN_TOL {
                // on the final straight: hold the heading perpendicular
                config.bearing_gain * normalize_angle(PI - fb.pose.theta)
            } else if view.solution.l_d < 0.0 {
                0.0
            } else {
                let magnitude = config
                    .machine
                    .articulation_for(view.solution.r_c)
                    .unwrap_or(config.machine.gamma_max);
                -view.side * magnitude
            }
        };

        let (throttle, brake) = if x <= 2.0 * config.margin {
            if fb.v > config.approach_speed {
                (0.0, config.brake_level)
            } else {
                (config.approach_throttle, 0.0)
            }
        } else {
            (1.0, 0.0)
        };
        ControlSignals {
            throttle,
            brake,
            steering: steer_toward(config, fb, target),
            lift: lift_until_empty_height(config, fb),
            direction: Direction::Forward,
            ..Default::default()
        }
    }

    fn extra_lift_rule(&self, config: &OperatorConfig, fb: &FeedbackFrame) -> ControlSignals {
        ControlSignals {
            brake: 1.0,
            steering: steer_toward(config, fb, parallel_articulation(fb)),
            lift: 1.0,
            direction: Direction::Forward,
            ..Default::default()
        }
    }

    /// Creep forward while raising slightly and tipping the bucket out.
    fn emptying_rule(&self, config: &OperatorConfig, fb: &FeedbackFrame, _t: f64) -> ControlSignals {
        let tilted = fb.phi <= config.machine.tilt_min + PHI_TOL;
        ControlSignals {
            throttle: config.empty_creep_throttle,
            steering: steer_toward(config, fb, parallel_articulation(fb)),
            lift: PHASE_6_LIFT,
            tilt: if tilted { 0.0 } else { -1.0 },
            direction: Direction::Forward,
            ..Default::default()
        }
    }
}
