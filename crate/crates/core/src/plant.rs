//! Kinematic stand-in for the wheel loader.
//!
//! The model is deliberately small: planar articulated kinematics, slew-rate
//! limited steering, rate-limited lift and tilt, a first-order engine, and a
//! longitudinal law with a direction-reversal lag. Everything is integrated
//! with a fixed explicit step, so identical inputs give bitwise-identical
//! successor states.
//!
//! The pose is that of the rear frame. The front frame, and with it the
//! bucket, points along `theta + gamma`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::channel::{ControlSignals, Direction, FeedbackFrame};
use crate::geom::{normalize_angle, Pose};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("invalid machine parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: &'static str },
    #[error("initial {name} = {value} outside [{min}, {max}]")]
    OutOfLimits {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("turning radius {radius} m below machine minimum {min_radius} m")]
    InfeasibleRadius { radius: f64, min_radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineParams {
    /// Front axle to articulation hinge, m.
    pub l_f: f64,
    /// Rear axle to articulation hinge, m.
    pub l_r: f64,
    pub gamma_max: f64,
    /// Articulation slew rate at full steering, rad/s.
    pub gamma_rate: f64,
    pub v_max_fwd: f64,
    pub v_max_rev: f64,
    /// Acceleration per unit throttle, m/s^2.
    pub accel_gain: f64,
    /// Deceleration at full brake, m/s^2.
    pub brake_decel: f64,
    pub coast_decel: f64,
    /// Bucket height rate at full lift, m/s.
    pub lift_rate_max: f64,
    pub tilt_rate_max: f64,
    /// Multiplier on the lift rate; 0.5 halves the lifting speed.
    pub lift_scale: f64,
    pub h_max: f64,
    pub tilt_min: f64,
    pub tilt_max: f64,
    pub engine_idle: f64,
    pub engine_max: f64,
    pub engine_tau: f64,
    pub reversal_tau: f64,
}

impl Default for MachineParams {
    fn default() -> Self {
        Self {
            l_f: 1.5,
            l_r: 1.5,
            gamma_max: 35f64.to_radians(),
            gamma_rate: 20f64.to_radians(),
            v_max_fwd: 3.0,
            v_max_rev: 3.0,
            accel_gain: 2.0,
            brake_decel: 3.0,
            coast_decel: 0.5,
            lift_rate_max: 0.5,
            tilt_rate_max: 0.6,
            lift_scale: 1.0,
            h_max: 4.0,
            tilt_min: (-45f64).to_radians(),
            tilt_max: 50f64.to_radians(),
            engine_idle: 800.0,
            engine_max: 2100.0,
            engine_tau: 0.5,
            reversal_tau: 0.8,
        }
    }
}

impl MachineParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("gamma_rate", self.gamma_rate),
            ("v_max_fwd", self.v_max_fwd),
            ("v_max_rev", self.v_max_rev),
            ("accel_gain", self.accel_gain),
            ("brake_decel", self.brake_decel),
            ("coast_decel", self.coast_decel),
            ("lift_rate_max", self.lift_rate_max),
            ("tilt_rate_max", self.tilt_rate_max),
            ("lift_scale", self.lift_scale),
            ("h_max", self.h_max),
            ("engine_idle", self.engine_idle),
            ("engine_tau", self.engine_tau),
            ("reversal_tau", self.reversal_tau),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(PlantError::InvalidParam {
                    name,
                    reason: "must be positive and finite",
                });
            }
        }
        let lo = 30f64.to_radians() - 1e-12;
        let hi = 45f64.to_radians() + 1e-12;
        if !(self.gamma_max >= lo && self.gamma_max <= hi) {
            return Err(PlantError::InvalidParam {
                name: "gamma_max",
                reason: "must lie within 30..45 degrees",
            });
        }
        if !(self.tilt_min < self.tilt_max) || !self.tilt_min.is_finite() || !self.tilt_max.is_finite() {
            return Err(PlantError::InvalidParam {
                name: "tilt_range",
                reason: "tilt_min must be below tilt_max",
            });
        }
        if !(self.engine_max > self.engine_idle) || !self.engine_max.is_finite() {
            return Err(PlantError::InvalidParam {
                name: "engine_max",
                reason: "must exceed engine_idle",
            });
        }
        Ok(())
    }

    pub fn min_turning_radius(&self) -> f64 {
        turning_radius(self.gamma_max, self.l_f, self.l_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineState {
    pub pose: Pose,
    pub v: f64,
    pub gamma: f64,
    pub h: f64,
    pub phi: f64,
    pub engine: f64,
    pub direction: Direction,
    /// Remaining direction-reversal lag, s.
    pub converter_lock: f64,
}

impl MachineState {
    /// Checks every state bound against the machine limits.
    pub fn within_limits(&self, p: &MachineParams) -> bool {
        let theta = self.pose.theta;
        self.pose.x.is_finite()
            && self.pose.z.is_finite()
            && theta > -PI
            && theta <= PI
            && self.gamma.abs() <= p.gamma_max
            && (0.0..=p.h_max).contains(&self.h)
            && (p.tilt_min..=p.tilt_max).contains(&self.phi)
            && (p.engine_idle..=p.engine_max).contains(&self.engine)
            && (-p.v_max_rev..=p.v_max_fwd).contains(&self.v)
            && self.converter_lock >= 0.0
    }
}

/// Machine at rest at `pose` with the bucket at height `h0` and angle `phi0`.
pub fn plant_init(params: &MachineParams, pose: Pose, h0: f64, phi0: f64) -> Result<MachineState, PlantError> {
    params.validate()?;
    if !(0.0..=params.h_max).contains(&h0) {
        return Err(PlantError::OutOfLimits {
            name: "h0",
            value: h0,
            min: 0.0,
            max: params.h_max,
        });
    }
    if !(params.tilt_min..=params.tilt_max).contains(&phi0) {
        return Err(PlantError::OutOfLimits {
            name: "phi0",
            value: phi0,
            min: params.tilt_min,
            max: params.tilt_max,
        });
    }
    Ok(MachineState {
        pose,
        v: 0.0,
        gamma: 0.0,
        h: h0,
        phi: phi0,
        engine: params.engine_idle,
        direction: Direction::Neutral,
        converter_lock: 0.0,
    })
}

/// Turning radius of the rear axle at articulation `gamma`; infinite when
/// driving straight.
pub fn turning_radius(gamma: f64, l_f: f64, l_r: f64) -> f64 {
    let s = gamma.sin().abs();
    if s == 0.0 {
        f64::INFINITY
    } else {
        (l_f + l_r * gamma.cos()) / s
    }
}

/// Non-negative articulation angle giving turning radius `radius`.
///
/// Solves `R sin(g) - l_r cos(g) = l_f` in closed form. Fails when the radius
/// is tighter than the machine can steer.
pub fn articulation_for_radius(radius: f64, l_f: f64, l_r: f64, gamma_max: f64) -> Result<f64, PlantError> {
    if radius.is_infinite() && radius > 0.0 {
        return Ok(0.0);
    }
    let min_radius = turning_radius(gamma_max, l_f, l_r);
    if !(radius >= min_radius) {
        return Err(PlantError::InfeasibleRadius { radius, min_radius });
    }
    let offset = l_r.atan2(radius);
    let gamma = offset + (l_f / radius.hypot(l_r)).asin();
    Ok(gamma.min(gamma_max))
}

/// The feedback channel: exactly the quantities the operator may observe.
pub fn observe(state: &MachineState) -> FeedbackFrame {
    FeedbackFrame {
        pose: state.pose,
        v: state.v,
        engine: state.engine,
        h: state.h,
        phi: state.phi,
        gamma: state.gamma,
        direction: state.direction,
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Advances the machine by one fixed step under controls `u`.
pub fn plant_step(p: &MachineParams, state: &MachineState, u: &ControlSignals, dt: f64) -> MachineState {
    let u = u.saturated();
    let mut next = *state;

    // engine
    let target = p.engine_idle + u.throttle * (p.engine_max - p.engine_idle);
    next.engine = (target + (state.engine - target) * (-dt / p.engine_tau).exp()).clamp(p.engine_idle, p.engine_max);

    // direction change against the motion engages the reversal lag
    let opposing = u.direction.sign() * state.v < 0.0;
    next.converter_lock = if u.direction != state.direction && opposing {
        p.reversal_tau
    } else {
        (state.converter_lock - dt).max(0.0)
    };
    next.direction = u.direction;

    // longitudinal
    let held = next.converter_lock > 0.0 && state.v == 0.0;
    let drive = if held {
        0.0
    } else {
        p.accel_gain * u.throttle * u.direction.sign()
    };
    let resist = u.brake * p.brake_decel + p.coast_decel;
    let mut v = if state.v == 0.0 {
        let hold = u.brake * p.brake_decel;
        if drive.abs() <= hold {
            0.0
        } else {
            (drive - sign(drive) * hold) * dt
        }
    } else {
        let v = state.v + (drive - resist * sign(state.v)) * dt;
        // the machine always passes through rest when reversing
        if v * state.v < 0.0 {
            0.0
        } else {
            v
        }
    };
    v = v.clamp(-p.v_max_rev, p.v_max_fwd);
    next.v = v;

    // articulation
    next.gamma = (state.gamma + u.steering * p.gamma_rate * dt).clamp(-p.gamma_max, p.gamma_max);

    // pose, heading taken at the step midpoint
    let yaw_rate = v * next.gamma.sin() / (p.l_f + p.l_r * next.gamma.cos());
    let mid = state.pose.theta + 0.5 * yaw_rate * dt;
    next.pose = Pose::new(
        state.pose.x + v * mid.cos() * dt,
        state.pose.z + v * mid.sin() * dt,
        normalize_angle(state.pose.theta + yaw_rate * dt),
    );

    // implements
    next.h = (state.h + u.lift * p.lift_rate_max * p.lift_scale * dt).clamp(0.0, p.h_max);
    next.phi = (state.phi + u.tilt * p.tilt_rate_max * dt).clamp(p.tilt_min, p.tilt_max);

    next
}

/// The default kinematic loader as a stateful plant.
#[derive(Debug, Clone)]
pub struct KinematicLoader {
    pub params: MachineParams,
    pub state: MachineState,
}

impl KinematicLoader {
    pub fn new(params: MachineParams, pose: Pose, h0: f64, phi0: f64) -> Result<Self, PlantError> {
        let state = plant_init(&params, pose, h0, phi0)?;
        Ok(Self { params, state })
    }
}
