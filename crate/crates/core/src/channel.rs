//! The black-box boundary between operator and machine.
//!
//! Only these two types cross it. The operator never sees machine internals
//! and the machine never sees operator phases.

use std::fmt;

use crate::geom::Pose;

/// Transmission direction selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Direction {
    Forward,
    Reverse,
    #[default]
    Neutral,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
            Direction::Neutral => 0.0,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Direction::Forward => "F",
            Direction::Reverse => "R",
            Direction::Neutral => "N",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "F" => Some(Direction::Forward),
            "R" => Some(Direction::Reverse),
            "N" => Some(Direction::Neutral),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// The operator's only outputs: the machine controls.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlSignals {
    /// Engine throttle, `[0, 1]`.
    pub throttle: f64,
    /// Service brake, `[0, 1]`.
    pub brake: f64,
    /// Commanded articulation rate as a fraction of the slew limit, `[-1, 1]`.
    pub steering: f64,
    /// Lift lever, `[-1, 1]`.
    pub lift: f64,
    /// Tilt lever, `[-1, 1]`, positive tilts the bucket back.
    pub tilt: f64,
    pub direction: Direction,
}

fn clamp_or_zero(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(lo, hi)
    }
}

impl ControlSignals {
    pub fn idle(direction: Direction) -> Self {
        Self {
            direction,
            ..Self::default()
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.throttle)
            && (0.0..=1.0).contains(&self.brake)
            && (-1.0..=1.0).contains(&self.steering)
            && (-1.0..=1.0).contains(&self.lift)
            && (-1.0..=1.0).contains(&self.tilt)
    }

    /// Clamps every lever into its range; NaN becomes zero.
    pub fn saturated(self) -> Self {
        Self {
            throttle: clamp_or_zero(self.throttle, 0.0, 1.0),
            brake: clamp_or_zero(self.brake, 0.0, 1.0),
            steering: clamp_or_zero(self.steering, -1.0, 1.0),
            lift: clamp_or_zero(self.lift, -1.0, 1.0),
            tilt: clamp_or_zero(self.tilt, -1.0, 1.0),
            direction: self.direction,
        }
    }
}

/// What the machine reports back: position and orientation, speed, engine
/// speed, and the human-perceivable implement and articulation positions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeedbackFrame {
    pub pose: Pose,
    /// Signed speed, m/s, positive forward.
    pub v: f64,
    /// Engine speed, rev/min.
    pub engine: f64,
    /// Bucket height, m.
    pub h: f64,
    /// Bucket angle, rad, positive tilted back.
    pub phi: f64,
    /// Articulation angle, rad, positive turns left when driving forward.
    pub gamma: f64,
    pub direction: Direction,
}
