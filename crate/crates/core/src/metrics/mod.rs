//! Diagnostic series, cycle KPIs and artifact emission.
//!
//! All series are plain projections of a [`Trace`]; nothing here feeds back
//! into a run.

mod csv_io;
mod svg;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

pub use csv_io::{emit_csv, read_csv, write_csv, CSV_HEADER};
pub use svg::{emit_svg, render_svg, PlotSpec, Series};

use crate::cosim::{Outcome, Trace, TraceRecord};
use crate::geom::{normalize_angle, Pose};
use crate::operator::Phase;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trace has no records")]
    EmptyTrace,
    #[error("trace did not reach done ({0})")]
    Incomplete(String),
    #[error("trace has no {0} record")]
    MissingPhase(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Formats a number with at most 15 significant digits, shortest form.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.14e}").parse().unwrap_or(v);
    format!("{rounded}")
}

fn non_empty(trace: &Trace) -> Result<&[TraceRecord]> {
    if trace.records.is_empty() {
        Err(MetricsError::EmptyTrace)
    } else {
        Ok(&trace.records)
    }
}

/// Bucket height over travelled distance.
pub fn harmony_series(trace: &Trace) -> Result<Vec<(f64, f64)>> {
    Ok(non_empty(trace)?.iter().map(|r| (r.s_cum, r.fb.h)).collect())
}

/// Bucket height over bucket angle.
pub fn bucket_series(trace: &Trace) -> Result<Vec<(f64, f64)>> {
    Ok(non_empty(trace)?.iter().map(|r| (r.fb.phi, r.fb.h)).collect())
}

/// Machine position in the plane.
pub fn location_series(trace: &Trace) -> Result<Vec<(f64, f64)>> {
    Ok(non_empty(trace)?.iter().map(|r| (r.fb.pose.x, r.fb.pose.z)).collect())
}

/// Angle between the bucket (front frame) and the receiver-parallel heading.
pub fn bucket_misalignment(pose: &Pose, gamma: f64) -> f64 {
    normalize_angle(pose.theta + gamma - PI).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleKpis {
    pub cycle_time: f64,
    pub reversing_pose: Pose,
    pub reversing_distance_to_receiver: f64,
    /// Bucket height when the receiver is reached.
    pub arrival_height: f64,
    /// Bucket height when emptying starts.
    pub emptying_height: f64,
    pub arrival_pose: Pose,
    pub arrival_speed: f64,
    pub arrival_misalignment: f64,
    /// Offset along the receiver from the dump point at arrival.
    pub arrival_offset: f64,
    pub entered_2a: bool,
    pub entered_5a: bool,
    pub phase_durations: BTreeMap<Phase, f64>,
    pub max_abs_gamma: f64,
    pub distance_travelled: f64,
}

impl CycleKpis {
    pub fn duration(&self, phase: Phase) -> f64 {
        self.phase_durations.get(&phase).copied().unwrap_or(0.0)
    }

    /// `key=value` lines with fixed formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("cycle_time", fmt_num(self.cycle_time));
        kv("reversing_x", fmt_num(self.reversing_pose.x));
        kv("reversing_z", fmt_num(self.reversing_pose.z));
        kv("reversing_theta", fmt_num(self.reversing_pose.theta));
        kv(
            "reversing_distance_to_receiver",
            fmt_num(self.reversing_distance_to_receiver),
        );
        kv("arrival_height", fmt_num(self.arrival_height));
        kv("emptying_height", fmt_num(self.emptying_height));
        kv("arrival_x", fmt_num(self.arrival_pose.x));
        kv("arrival_z", fmt_num(self.arrival_pose.z));
        kv("arrival_theta", fmt_num(self.arrival_pose.theta));
        kv("arrival_speed", fmt_num(self.arrival_speed));
        kv("arrival_misalignment", fmt_num(self.arrival_misalignment));
        kv("arrival_offset", fmt_num(self.arrival_offset));
        kv("entered_2a", self.entered_2a.to_string());
        kv("entered_5a", self.entered_5a.to_string());
        kv("max_abs_gamma", fmt_num(self.max_abs_gamma));
        kv("distance_travelled", fmt_num(self.distance_travelled));
        for phase in Phase::ALL {
            kv(&format!("duration_{}", phase.label()), fmt_num(self.duration(phase)));
        }
        out
    }
}

/// KPIs of a completed cycle.
pub fn cycle_kpis(trace: &Trace) -> Result<CycleKpis> {
    let records = non_empty(trace)?;
    if trace.outcome != Outcome::Done {
        return Err(MetricsError::Incomplete(format!("{:?}", trace.outcome)));
    }
    let first = |pred: &dyn Fn(Phase) -> bool| records.iter().find(|r| pred(r.phase));

    let done = records.last().expect("non-empty");
    let t0 = records[0].t;

    let reversing = first(&|p| p == Phase::Reversing).ok_or(MetricsError::MissingPhase("reversing"))?;
    let arrival = first(&|p| p >= Phase::ExtraLift).ok_or(MetricsError::MissingPhase("arrival"))?;
    let emptying = first(&|p| p == Phase::Emptying).ok_or(MetricsError::MissingPhase("emptying"))?;
    let (dx, dz) = trace.meta.dump_point;

    let mut phase_durations = BTreeMap::new();
    for pair in records.windows(2) {
        *phase_durations.entry(pair[0].phase).or_insert(0.0) += pair[1].t - pair[0].t;
    }

    Ok(CycleKpis {
        cycle_time: done.t - t0,
        reversing_pose: reversing.fb.pose,
        reversing_distance_to_receiver: reversing.fb.pose.distance_to(dx, dz),
        arrival_height: arrival.fb.h,
        emptying_height: emptying.fb.h,
        arrival_pose: arrival.fb.pose,
        arrival_speed: arrival.fb.v,
        arrival_misalignment: bucket_misalignment(&arrival.fb.pose, arrival.fb.gamma),
        arrival_offset: arrival.fb.pose.z - dz,
        entered_2a: records.iter().any(|r| r.phase == Phase::TurnLimited),
        entered_5a: records.iter().any(|r| r.phase == Phase::ExtraLift),
        phase_durations,
        max_abs_gamma: records.iter().map(|r| r.fb.gamma.abs()).fold(0.0, f64::max),
        distance_travelled: done.s_cum,
    })
}
