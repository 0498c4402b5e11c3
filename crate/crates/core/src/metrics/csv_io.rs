use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{fmt_num, MetricsError, Result};
use crate::channel::{ControlSignals, Direction, FeedbackFrame};
use crate::cosim::{Trace, TraceRecord};
use crate::geom::Pose;
use crate::operator::Phase;

pub const CSV_HEADER: [&str; 17] = [
    "t",
    "phase",
    "throttle",
    "brake",
    "steering",
    "lift",
    "tilt",
    "direction",
    "x",
    "z",
    "theta",
    "v",
    "gamma",
    "h",
    "phi",
    "engine",
    "s_cum",
];

fn row(r: &TraceRecord) -> [String; 17] {
    [
        fmt_num(r.t),
        r.phase.label().to_string(),
        fmt_num(r.u.throttle),
        fmt_num(r.u.brake),
        fmt_num(r.u.steering),
        fmt_num(r.u.lift),
        fmt_num(r.u.tilt),
        r.u.direction.code().to_string(),
        fmt_num(r.fb.pose.x),
        fmt_num(r.fb.pose.z),
        fmt_num(r.fb.pose.theta),
        fmt_num(r.fb.v),
        fmt_num(r.fb.gamma),
        fmt_num(r.fb.h),
        fmt_num(r.fb.phi),
        fmt_num(r.fb.engine),
        fmt_num(r.s_cum),
    ]
}

/// Writes the trace as CSV to any writer.
pub fn write_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let map = |e: csv::Error| MetricsError::Csv(e.to_string());
    w.write_record(CSV_HEADER).map_err(map)?;
    for r in &trace.records {
        w.write_record(row(r)).map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(trace: &Trace, path: &Path) -> Result<()> {
    write_csv(trace, BufWriter::new(File::create(path)?))
}

/// Reads records back from CSV written by [`write_csv`]. The machine's
/// engaged direction is not a column and comes back as neutral.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rd.headers().map_err(|e| MetricsError::Csv(e.to_string()))?;
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(MetricsError::Csv("unexpected header".into()));
    }
    let mut records = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| MetricsError::Csv(e.to_string()))?;
        let num = |col: usize| -> Result<f64> {
            rec[col]
                .parse()
                .map_err(|_| MetricsError::Csv(format!("line {line}: bad number in column {}", CSV_HEADER[col])))
        };
        let phase = Phase::from_label(&rec[1])
            .ok_or_else(|| MetricsError::Csv(format!("line {line}: unknown phase `{}`", &rec[1])))?;
        let direction = Direction::from_code(&rec[7])
            .ok_or_else(|| MetricsError::Csv(format!("line {line}: unknown direction `{}`", &rec[7])))?;
        records.push(TraceRecord {
            t: num(0)?,
            phase,
            u: ControlSignals {
                throttle: num(2)?,
                brake: num(3)?,
                steering: num(4)?,
                lift: num(5)?,
                tilt: num(6)?,
                direction,
            },
            fb: FeedbackFrame {
                pose: Pose {
                    x: num(8)?,
                    z: num(9)?,
                    theta: num(10)?,
                },
                v: num(11)?,
                gamma: num(12)?,
                h: num(13)?,
                phi: num(14)?,
                engine: num(15)?,
                direction: Direction::default(),
            },
            s_cum: num(16)?,
        });
    }
    Ok(records)
}
