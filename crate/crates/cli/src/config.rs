//! Run configuration files.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sphereflow::axisym_flow::InitialAxisym;
use sphereflow::curve_flow::{InitialCurve, StopRules, TimeStepPolicy};
use sphereflow::quantities::{Geometry, Quantity, QuantitySet};
use sphereflow::spectral::DiffMode;
use sphereflow::SpeedSpec;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Echoed into the manifest; no built-in run draws random numbers.
    #[serde(default)]
    pub seed: u64,
    /// Output root; `SPHEREFLOW_OUT` and then `./sphereflow-out` otherwise.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub plots: bool,
    pub run: RunSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RunSpec {
    SphereOde(SphereOdeConfig),
    CurveFlow(CurveFlowConfig),
    AxisymFlow(AxisymFlowConfig),
}

impl RunSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            RunSpec::SphereOde(_) => "sphere_ode",
            RunSpec::CurveFlow(_) => "curve_flow",
            RunSpec::AxisymFlow(_) => "axisym_flow",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereOdeConfig {
    pub speed: SpeedSpec,
    pub r0: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub direction: Direction,
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FlowName {
    #[default]
    Geometric,
    AngenentOvalFlow,
    EllipseFlow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFlowConfig {
    #[serde(default)]
    pub flow: FlowName,
    /// Required for geometric flows.
    #[serde(default)]
    pub speed: Option<SpeedSpec>,
    /// Closed-form initial curve; exactly one of this and `initial_csv`.
    #[serde(default)]
    pub initial: Option<InitialCurve>,
    /// CSV of `(theta, rho)` pairs on a uniform grid, which then fixes the
    /// resolution.
    #[serde(default)]
    pub initial_csv: Option<PathBuf>,
    #[serde(default = "default_curve_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub diff: DiffMode,
    #[serde(default)]
    pub time_step: TimeStepPolicy,
    #[serde(default)]
    pub stops: StopRules,
    #[serde(default)]
    pub quantities: Option<Vec<Quantity>>,
    #[serde(default = "one")]
    pub cadence: usize,
    #[serde(default)]
    pub checkpoints: Vec<f64>,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisymFlowConfig {
    /// Its `n` is the hypersurface dimension.
    pub speed: SpeedSpec,
    pub initial: InitialAxisym,
    #[serde(default = "default_axisym_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub diff: DiffMode,
    #[serde(default)]
    pub time_step: TimeStepPolicy,
    #[serde(default)]
    pub stops: StopRules,
    #[serde(default)]
    pub quantities: Option<Vec<Quantity>>,
    #[serde(default = "one")]
    pub cadence: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl CurveFlowConfig {
    /// The requested quantities, or the defaults with the Harnack monitor
    /// added for geometric flows.
    pub fn quantity_set(&self) -> QuantitySet {
        match &self.quantities {
            Some(q) => QuantitySet::new(q.clone()),
            None if self.flow == FlowName::Geometric => {
                QuantitySet::curve_default().with(Quantity::HarnackMin)
            }
            None => QuantitySet::curve_default(),
        }
    }
}

impl AxisymFlowConfig {
    pub fn quantity_set(&self) -> QuantitySet {
        match &self.quantities {
            Some(q) => QuantitySet::new(q.clone()),
            None => QuantitySet::axisym_default(),
        }
    }
}

fn default_curve_resolution() -> usize {
    256
}

fn default_axisym_resolution() -> usize {
    128
}

fn one() -> usize {
    1
}

fn default_max_steps() -> usize {
    5_000_000
}

/// Parses and validates a configuration. Errors carry the path of the
/// offending key.
pub fn parse(text: &str) -> Result<RunConfig, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            inner.to_string()
        } else {
            format!("{path}: {inner}")
        }
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn validate(cfg: &RunConfig) -> Result<(), String> {
    if cfg.schema_version != CONFIG_SCHEMA_VERSION {
        return Err(format!(
            "schema_version: expected {CONFIG_SCHEMA_VERSION}, got {}",
            cfg.schema_version
        ));
    }
    let speed = |s: &SpeedSpec, at: &str| s.build().map(|_| ()).map_err(|e| format!("{at}: {e}"));
    let positive = |v: f64, at: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(format!("{at}: must be positive and finite, got {v}"))
        }
    };
    let step = |p: &TimeStepPolicy, at: &str| match *p {
        TimeStepPolicy::ExplicitCfl(c) | TimeStepPolicy::Fixed(c) => positive(c, at),
    };
    match &cfg.run {
        RunSpec::SphereOde(c) => {
            speed(&c.speed, "run.sphere_ode.speed")?;
            if !(c.r0 > 0.0 && c.r0 < std::f64::consts::FRAC_PI_2) {
                return Err(format!("run.sphere_ode.r0: must lie in (0, pi/2), got {}", c.r0));
            }
            positive(c.tol, "run.sphere_ode.tol")?;
        }
        RunSpec::CurveFlow(c) => {
            match (c.flow, &c.speed) {
                (FlowName::Geometric, None) => {
                    return Err("run.curve_flow.speed: required for the geometric flow".into())
                }
                (FlowName::Geometric, Some(s)) => {
                    speed(s, "run.curve_flow.speed")?;
                    if s.n != 1 {
                        return Err(format!("run.curve_flow.speed.n: curves need n = 1, got {}", s.n));
                    }
                }
                (_, Some(_)) => {
                    return Err("run.curve_flow.speed: only used by the geometric flow".into())
                }
                (_, None) => {}
            }
            if c.initial.is_some() == c.initial_csv.is_some() {
                return Err("run.curve_flow: give exactly one of initial and initial_csv".into());
            }
            if c.resolution < 8 {
                return Err(format!("run.curve_flow.resolution: need at least 8 nodes, got {}", c.resolution));
            }
            step(&c.time_step, "run.curve_flow.time_step")?;
            if c.cadence == 0 {
                return Err("run.curve_flow.cadence: must be at least 1".into());
            }
            c.stops.validate().map_err(|e| format!("run.curve_flow.stops: {e}"))?;
            c.quantity_set()
                .validate(Geometry::Curve, c.flow == FlowName::Geometric)
                .map_err(|e| format!("run.curve_flow.quantities: {e}"))?;
        }
        RunSpec::AxisymFlow(c) => {
            speed(&c.speed, "run.axisym_flow.speed")?;
            if c.speed.n < 2 {
                return Err(format!("run.axisym_flow.speed.n: need n >= 2, got {}", c.speed.n));
            }
            if c.resolution < 8 {
                return Err(format!("run.axisym_flow.resolution: need at least 8 intervals, got {}", c.resolution));
            }
            step(&c.time_step, "run.axisym_flow.time_step")?;
            if c.cadence == 0 {
                return Err("run.axisym_flow.cadence: must be at least 1".into());
            }
            c.stops.validate().map_err(|e| format!("run.axisym_flow.stops: {e}"))?;
            c.quantity_set()
                .validate(Geometry::Axisym, true)
                .map_err(|e| format!("run.axisym_flow.quantities: {e}"))?;
        }
    }
    Ok(())
}
