//! Scenario configuration and the adaptation experiments.
//!
//! Config files are line based: `section.key = value`, `#` starts a comment,
//! blank lines are ignored. Omitted keys take their defaults, unknown or
//! repeated keys are errors. Angles are given in degrees (`*_deg` keys).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::cosim::{run_cycle, CosimError, Trace};
use crate::geom::WorkplaceLayout;
use crate::metrics::{cycle_kpis, CycleKpis};
use crate::operator::{MachineKnowledge, OperatorConfig, OperatorError};
use crate::plant::{MachineParams, PlantError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for {key}: {reason}")]
    Validation { key: String, reason: String },
}

impl ConfigError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        ConfigError::Parse {
            line,
            message: message.into(),
        }
    }

    fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub machine: MachineParams,
    pub operator: OperatorConfig,
    pub dt: f64,
    pub t_max: f64,
    pub out_dir: Option<PathBuf>,
    pub name: String,
}

impl From<&MachineParams> for MachineKnowledge {
    fn from(p: &MachineParams) -> Self {
        MachineKnowledge {
            l_f: p.l_f,
            l_r: p.l_r,
            gamma_max: p.gamma_max,
            gamma_rate: p.gamma_rate,
            tilt_min: p.tilt_min,
            tilt_max: p.tilt_max,
        }
    }
}

pub const DEFAULT_LAYOUT_A: f64 = 3.0;
pub const DEFAULT_LAYOUT_B: f64 = 3.0;

impl Default for ScenarioConfig {
    fn default() -> Self {
        let machine = MachineParams::default();
        let layout = WorkplaceLayout {
            a: DEFAULT_LAYOUT_A,
            b: DEFAULT_LAYOUT_B,
            receiver_halfwidth: 1.5,
        };
        Self {
            operator: OperatorConfig::new(layout, MachineKnowledge::from(&machine)),
            machine,
            dt: 0.01,
            t_max: 300.0,
            out_dir: None,
            name: "nominal".to_string(),
        }
    }
}

impl ScenarioConfig {
    /// Applies a machine change and refreshes what the operator knows of it.
    pub fn with_machine(mut self, f: impl FnOnce(&mut MachineParams)) -> Self {
        f(&mut self.machine);
        self.operator.machine = MachineKnowledge::from(&self.machine);
        self
    }

    pub fn with_operator(mut self, f: impl FnOnce(&mut OperatorConfig)) -> Self {
        f(&mut self.operator);
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.machine.validate().map_err(|e| match e {
            PlantError::InvalidParam { name, reason } => ConfigError::invalid(format!("machine.{name}"), reason),
            other => ConfigError::invalid("machine", other.to_string()),
        })?;
        let layout = &self.operator.layout;
        if !(layout.a > 0.0 && layout.a.is_finite()) {
            return Err(ConfigError::invalid("layout.a", "must be positive"));
        }
        if !(layout.b > 0.0 && layout.b.is_finite()) {
            return Err(ConfigError::invalid("layout.b", "must be positive"));
        }
        if !(layout.receiver_halfwidth >= 0.0) {
            return Err(ConfigError::invalid(
                "layout.receiver_halfwidth",
                "must be non-negative",
            ));
        }
        self.operator.validate().map_err(|e| match e {
            OperatorError::InvalidConfig { name, reason } => ConfigError::invalid(format!("operator.{name}"), reason),
            other => ConfigError::invalid("operator", other.to_string()),
        })?;
        if self.operator.h_empty > self.machine.h_max {
            return Err(ConfigError::invalid(
                "operator.h_empty",
                format!("exceeds machine.h_max = {}", self.machine.h_max),
            ));
        }
        if self.operator.h_init > self.machine.h_max {
            return Err(ConfigError::invalid(
                "operator.h_init",
                format!("exceeds machine.h_max = {}", self.machine.h_max),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError::invalid("sim.dt", "must be positive"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(ConfigError::invalid("sim.t_max", "must be positive"));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Trace, CosimError> {
        run_cycle(&self.machine, &self.operator, self.dt, self.t_max)
    }
}

fn set_number(cfg: &mut ScenarioConfig, key: &str, v: f64) -> bool {
    let m = &mut cfg.machine;
    let o = &mut cfg.operator;
    let slot: &mut f64 = match key {
        "machine.l_f" => &mut m.l_f,
        "machine.l_r" => &mut m.l_r,
        "machine.v_max_fwd" => &mut m.v_max_fwd,
        "machine.v_max_rev" => &mut m.v_max_rev,
        "machine.accel_gain" => &mut m.accel_gain,
        "machine.brake_decel" => &mut m.brake_decel,
        "machine.coast_decel" => &mut m.coast_decel,
        "machine.lift_rate_max" => &mut m.lift_rate_max,
        "machine.lift_scale" => &mut m.lift_scale,
        "machine.h_max" => &mut m.h_max,
        "machine.engine_idle" => &mut m.engine_idle,
        "machine.engine_max" => &mut m.engine_max,
        "machine.engine_tau" => &mut m.engine_tau,
        "machine.reversal_tau" => &mut m.reversal_tau,
        "layout.a" => &mut o.layout.a,
        "layout.b" => &mut o.layout.b,
        "layout.receiver_halfwidth" => &mut o.layout.receiver_halfwidth,
        "operator.h_empty" => &mut o.h_empty,
        "operator.h_init" => &mut o.h_init,
        "operator.init_throttle" => &mut o.init_throttle,
        "operator.v_safe" => &mut o.v_safe,
        "operator.ratio_window" => &mut o.ratio_window,
        "operator.margin" => &mut o.margin,
        "operator.brake_level" => &mut o.brake_level,
        "operator.approach_throttle" => &mut o.approach_throttle,
        "operator.approach_speed" => &mut o.approach_speed,
        "operator.stopping_decel" => &mut o.stopping_decel,
        "operator.steer_gain" => &mut o.steer_gain,
        "operator.bearing_gain" => &mut o.bearing_gain,
        "operator.empty_creep_throttle" => &mut o.empty_creep_throttle,
        "operator.empty_duration" => &mut o.empty_duration,
        "operator.extra_lift_timeout" => &mut o.extra_lift_timeout,
        "sim.dt" => &mut cfg.dt,
        "sim.t_max" => &mut cfg.t_max,
        _ => {
            let slot: &mut f64 = match key {
                "machine.gamma_max_deg" => &mut m.gamma_max,
                "machine.gamma_rate_deg" => &mut m.gamma_rate,
                "machine.tilt_rate_max_deg" => &mut m.tilt_rate_max,
                "machine.tilt_min_deg" => &mut m.tilt_min,
                "machine.tilt_max_deg" => &mut m.tilt_max,
                "operator.phi_init_deg" => &mut o.phi_init,
                "operator.aim_tol_deg" => &mut o.aim_tol,
                _ => return false,
            };
            *slot = v.to_radians();
            return true;
        }
    };
    *slot = v;
    true
}

/// Parses and validates a scenario config.
pub fn parse_config(text: &[u8]) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.split(|&b| b == b'\n').enumerate() {
        let line_no = idx + 1;
        let line = std::str::from_utf8(raw).map_err(|_| ConfigError::parse(line_no, "not valid UTF-8"))?;
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::parse(line_no, "expected `section.key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !key.contains('.') {
            return Err(ConfigError::parse(line_no, format!("key `{key}` has no section")));
        }
        if value.is_empty() {
            return Err(ConfigError::parse(line_no, format!("missing value for `{key}`")));
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::parse(line_no, format!("duplicate key `{key}`")));
        }
        match key {
            "sim.name" => cfg.name = value.to_string(),
            "sim.out" => cfg.out_dir = Some(PathBuf::from(value)),
            _ => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| ConfigError::parse(line_no, format!("`{value}` is not a number")))?;
                if !v.is_finite() {
                    return Err(ConfigError::parse(line_no, format!("`{value}` is not finite")));
                }
                if !set_number(&mut cfg, key, v) {
                    return Err(ConfigError::parse(line_no, format!("unknown key `{key}`")));
                }
            }
        }
    }
    cfg.operator.machine = MachineKnowledge::from(&cfg.machine);
    cfg.validate()?;
    Ok(cfg)
}

/// The three adaptation experiments, each a pair of scenarios that differ in
/// one respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Receiver distance `b` against `1.5 b`.
    Layout,
    /// Full lifting speed against half.
    Lift,
    /// Low against high bucket when leaving the bank, at half lifting speed.
    BucketHeight,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Layout => "layout",
            Experiment::Lift => "lift",
            Experiment::BucketHeight => "bucketheight",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "layout" => Some(Experiment::Layout),
            "lift" => Some(Experiment::Lift),
            "bucketheight" => Some(Experiment::BucketHeight),
            _ => None,
        }
    }

    /// The baseline and variant scenarios derived from `base`.
    pub fn cases(self, base: &ScenarioConfig) -> [ScenarioConfig; 2] {
        let named = |cfg: ScenarioConfig, label: &str| ScenarioConfig {
            name: label.to_string(),
            ..cfg
        };
        match self {
            Experiment::Layout => [
                named(base.clone(), "b"),
                named(base.clone().with_operator(|o| o.layout.b *= 1.5), "b_x1.5"),
            ],
            Experiment::Lift => [
                named(base.clone(), "lift_full"),
                named(base.clone().with_machine(|m| m.lift_scale *= 0.5), "lift_half"),
            ],
            Experiment::BucketHeight => {
                let slow = base.clone().with_machine(|m| m.lift_scale *= 0.5);
                let high = (slow.operator.h_init + 1.0).min(slow.operator.h_empty);
                [
                    named(slow.clone(), "bucket_low"),
                    named(slow.with_operator(|o| o.h_init = high), "bucket_high"),
                ]
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub config: ScenarioConfig,
    pub trace: Trace,
    pub kpis: Option<CycleKpis>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub cases: Vec<CaseResult>,
    /// Named direction-of-effect checks and whether each held.
    pub checks: Vec<(String, bool)>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    /// Side-by-side KPI table, tab separated.
    pub fn table(&self) -> String {
        let mut out = String::from("kpi");
        for c in &self.cases {
            let _ = write!(out, "\t{}", c.config.name);
        }
        out.push('\n');
        type Row = (&'static str, fn(&CycleKpis) -> f64);
        let rows: [Row; 6] = [
            ("cycle_time", |k| k.cycle_time),
            ("reversing_x", |k| k.reversing_pose.x),
            ("reversing_z", |k| k.reversing_pose.z),
            ("reversing_distance_to_receiver", |k| k.reversing_distance_to_receiver),
            ("arrival_height", |k| k.arrival_height),
            ("max_abs_gamma", |k| k.max_abs_gamma),
        ];
        for (name, get) in rows {
            out.push_str(name);
            for c in &self.cases {
                match &c.kpis {
                    Some(k) => {
                        let _ = write!(out, "\t{}", crate::metrics::fmt_num(get(k)));
                    }
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        for (name, get) in [("entered_2a", 0usize), ("entered_5a", 1)] {
            out.push_str(name);
            for c in &self.cases {
                match &c.kpis {
                    Some(k) => {
                        let flag = if get == 0 { k.entered_2a } else { k.entered_5a };
                        let _ = write!(out, "\t{flag}");
                    }
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        for (name, ok) in &self.checks {
            let _ = writeln!(out, "check\t{name}\t{}", if *ok { "pass" } else { "FAIL" });
        }
        out
    }
}

/// Runs both cases of an experiment (in parallel) and evaluates its
/// direction-of-effect checks.
pub fn run_experiment(experiment: Experiment, base: &ScenarioConfig) -> Result<ExperimentReport, CosimError> {
    let [first, second] = experiment.cases(base);
    let (r1, r2) = std::thread::scope(|s| {
        let h = s.spawn(|| first.run());
        let r2 = second.run();
        (h.join().expect("scenario thread panicked"), r2)
    });
    let cases: Vec<CaseResult> = [(first, r1?), (second, r2?)]
        .into_iter()
        .map(|(config, trace)| {
            let kpis = cycle_kpis(&trace).ok();
            CaseResult { config, trace, kpis }
        })
        .collect();

    let mut checks = Vec::new();
    for c in &cases {
        checks.push((format!("{} reaches done", c.config.name), c.trace.is_done()));
    }
    let dist = |i: usize| cases[i].kpis.as_ref().map(|k| k.reversing_distance_to_receiver);
    match experiment {
        Experiment::Layout => {}
        Experiment::Lift => {
            let ok = matches!((dist(0), dist(1)), (Some(full), Some(half)) if half > full);
            checks.push(("slower lift reverses farther from the receiver".to_string(), ok));
        }
        Experiment::BucketHeight => {
            let ok = matches!((dist(0), dist(1)), (Some(low), Some(high)) if high < low);
            checks.push(("higher bucket reverses nearer the receiver".to_string(), ok));
        }
    }
    Ok(ExperimentReport {
        experiment,
        cases,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config(b"").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        let cfg = parse_config(b"# only a comment\n\n   \n").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
    }

    #[test]
    fn values_and_comments() {
        let text =
            b"machine.lift_scale = 0.5  # halved\nlayout.b=7\nmachine.gamma_max_deg = 40\nsim.name = half lift\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.machine.lift_scale, 0.5);
        assert_eq!(cfg.operator.layout.b, 7.0);
        assert!((cfg.machine.gamma_max - 40f64.to_radians()).abs() < 1e-15);
        assert_eq!(cfg.operator.machine.gamma_max, cfg.machine.gamma_max);
        assert_eq!(cfg.name, "half lift");
    }

    #[test]
    fn h_empty_above_h_max_is_rejected() {
        match parse_config(b"operator.h_empty = 99") {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "operator.h_empty"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases: [(&[u8], usize); 6] = [
            (b"\nmachine.lift_scal = 1", 2),
            (b"machine.lift_scale 1", 1),
            (b"a = 1", 1),
            (b"layout.a = 1\nlayout.a = 2", 2),
            (b"layout.a = x", 1),
            (b"\n\nlayout.a = \xff", 3),
        ];
        for (text, line) in cases {
            match parse_config(text) {
                Err(ConfigError::Parse { line: l, .. }) => assert_eq!(l, line),
                other => panic!("{:?} -> {other:?}", String::from_utf8_lossy(text)),
            }
        }
    }

    #[test]
    fn machine_validation_names_key() {
        match parse_config(b"machine.gamma_max_deg = 60") {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "machine.gamma_max"),
            other => panic!("{other:?}"),
        }
        assert!(parse_config(b"sim.dt = 0").is_err());
        assert!(parse_config(b"layout.a = -1").is_err());
        assert!(parse_config(b"layout.a = inf").is_err());
    }

    #[test]
    fn experiment_names() {
        for e in [Experiment::Layout, Experiment::Lift, Experiment::BucketHeight] {
            assert_eq!(Experiment::from_name(e.name()), Some(e));
        }
        assert_eq!(Experiment::from_name("speed"), None);
    }
}
