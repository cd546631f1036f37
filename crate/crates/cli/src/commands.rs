//! Subcommand bodies. Each returns the process exit status.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};
use sphereflow::axisym_flow::{self, AxisymGraph, AxisymOptions};
use sphereflow::curve_flow::{self, FlowKind, FlowSpec, RadialCurve, RunOptions};
use sphereflow::gnomonic::{self, EquivalencePair, PlanarRadialCurve};
use sphereflow::quantities::RunRecord;
use sphereflow::record::{Manifest, Series, StopReason};
use sphereflow::reflection::{self, Shape, VGrid};
use sphereflow::spectral::DiffMode;
use sphereflow::sphere_ode::{self, SphereStop};
use sphereflow_verify::Suite;

use crate::config::{AxisymFlowConfig, CurveFlowConfig, Direction, FlowName, RunConfig, RunSpec, SphereOdeConfig};
use crate::output::{self, CurveFile};
use crate::plot::{self, Line};

/// Where and how a run writes its files.
pub struct Sink {
    pub root: PathBuf,
    pub plots: bool,
}

impl Sink {
    pub fn new(explicit: Option<&Path>, plots: bool) -> Self {
        Self {
            root: output::output_root(explicit),
            plots,
        }
    }
}

pub fn run_config(cfg: &RunConfig, sink: &Sink) -> Result<i32> {
    let config = serde_json::to_value(cfg)?;
    match &cfg.run {
        RunSpec::SphereOde(c) => sphere_ode(c, config, sink),
        RunSpec::CurveFlow(c) => curve_flow(c, config, sink),
        RunSpec::AxisymFlow(c) => axisym_flow(c, config, sink),
    }
}

/// Writes the record, plots it and prints a summary; exit 1 unless the stop
/// was clean.
fn finish(dir: &Path, record: &RunRecord, plots: bool, extra: Value) -> Result<i32> {
    record.write(dir)?;
    if plots {
        write_plots(dir, record)?;
    }
    let m = &record.manifest;
    let mut summary = json!({
        "output": dir,
        "kind": m.kind,
        "stop_reason": m.stop_reason,
        "stop_detail": m.stop_detail,
        "steps": m.steps,
        "final_time": m.final_time,
    });
    if let (Value::Object(s), Value::Object(e)) = (&mut summary, extra) {
        s.extend(e);
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(if m.stop_reason.is_clean() { 0 } else { 1 })
}

/// Records a run that could not complete and returns exit status 1.
fn record_failure(dir: &Path, kind: &str, config: Value, err: &anyhow::Error) -> Result<i32> {
    let mut manifest = Manifest::new(kind, config);
    manifest.stop_reason = StopReason::Failed;
    manifest.stop_detail = Some(format!("{err:#}"));
    RunRecord::new(manifest, Series::new(vec!["t".into()])).write(dir)?;
    eprintln!("error: {err:#}");
    eprintln!("manifest written to {}", dir.join("manifest.json").display());
    Ok(1)
}

fn write_plots(dir: &Path, record: &RunRecord) -> Result<()> {
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    let series = &record.series;
    for name in series.columns.iter().skip(1) {
        let points = series.pairs(name);
        if points.is_empty() {
            continue;
        }
        let svg = plot::line_chart(name, "t", name, &[Line { label: name.clone(), points }], false);
        fs::write(plots.join(format!("series_{name}.svg")), svg)?;
    }
    let mut lines = Vec::new();
    for snap in &record.snapshots {
        let (Some(angle), Some(radius)) = (
            snap.column("theta").or_else(|| snap.column("psi")),
            snap.column("rho").or_else(|| snap.column("u")),
        ) else {
            continue;
        };
        // Azimuthal equidistant picture around the pole.
        let mut points: Vec<(f64, f64)> = angle
            .iter()
            .zip(&radius)
            .map(|(a, r)| (r * a.cos(), r * a.sin()))
            .collect();
        if snap.column("theta").is_some() {
            points.push(points[0]);
        }
        lines.push(Line {
            label: format!("{} (t = {:.4})", snap.name, snap.t),
            points,
        });
    }
    if !lines.is_empty() {
        let svg = plot::line_chart("snapshots", "x", "y", &lines, true);
        fs::write(plots.join("snapshots.svg"), svg)?;
    }
    Ok(())
}

pub fn sphere_ode(c: &SphereOdeConfig, config: Value, sink: &Sink) -> Result<i32> {
    let speed = c.speed.build()?;
    let dir = output::create_run_dir(&sink.root, "sphere_ode")?;
    let attempt = || -> Result<(RunRecord, Value)> {
        let traj = match c.direction {
            Direction::Forward => sphere_ode::integrate_sphere(&speed, c.r0, (0.0, f64::INFINITY), c.tol)?,
            Direction::Backward => sphere_ode::integrate_sphere(&speed, c.r0, (0.0, f64::NEG_INFINITY), c.tol)?,
            Direction::Both => sphere_ode::integrate_both(&speed, c.r0, c.tol)?,
        };
        let life = sphere_ode::lifespan(&speed, c.tol.clamp(1e-13, 1e-5))?;
        let mut series = Series::new(vec!["t".into(), "r".into(), "F_value".into()]);
        let mut samples = traj.samples.clone();
        if c.direction == Direction::Backward {
            samples.reverse();
        }
        for &(t, r) in &samples {
            series.push(vec![Some(t), Some(r), speed.on_diagonal(1.0 / r.tan()).ok()]);
        }
        let mut manifest = Manifest::new("sphere_ode", config.clone());
        manifest.series_schema = series.columns.clone();
        manifest.stop_reason = match traj.stop {
            SphereStop::Collapse => StopReason::Collapse,
            SphereStop::Equator => StopReason::Equator,
            SphereStop::TimeLimit => StopReason::MaxTime,
        };
        manifest.steps = samples.len();
        manifest.final_time = samples.last().map_or(0.0, |s| s.0);
        let extra = json!({
            "lifespan": life,
            "collapse_time": traj.collapse_time,
            "equator_time": traj.equator_time,
        });
        if let Value::Object(e) = &extra {
            manifest.notes.extend(e.clone());
        }
        Ok((RunRecord::new(manifest, series), extra))
    };
    match attempt() {
        Ok((record, extra)) => finish(&dir, &record, sink.plots, extra),
        Err(e) => record_failure(&dir, "sphere_ode", config, &e),
    }
}

fn read_curve_csv(path: &Path, mode: DiffMode) -> Result<RadialCurve> {
    let file = CurveFile::read(path)?;
    let rho = file.values_on_grid("rho", TAU, false)?;
    RadialCurve::new(rho, 0.0, mode).with_context(|| format!("initial curve from {}", path.display()))
}

pub fn curve_flow(c: &CurveFlowConfig, config: Value, sink: &Sink) -> Result<i32> {
    let dir = output::create_run_dir(&sink.root, "curve_flow")?;
    let attempt = || -> Result<RunRecord> {
        let initial = match (&c.initial, &c.initial_csv) {
            (Some(init), _) => init.build(c.resolution, c.diff)?,
            (None, Some(path)) => read_curve_csv(path, c.diff)?,
            (None, None) => bail!("no initial curve"),
        };
        let kind = match c.flow {
            FlowName::Geometric => {
                let spec = c.speed.as_ref().ok_or_else(|| anyhow!("geometric flow needs a speed"))?;
                FlowKind::Geometric(spec.build()?)
            }
            FlowName::AngenentOvalFlow => FlowKind::AngenentOvalFlow,
            FlowName::EllipseFlow => FlowKind::EllipseFlow,
        };
        let mut spec = FlowSpec::new(kind);
        spec.time_step = c.time_step;
        spec.stops = c.stops;
        let opts = RunOptions {
            checkpoints: c.checkpoints.clone(),
            cadence: c.cadence,
            max_steps: c.max_steps,
            snapshot_every: c.snapshot_every,
            config: config.clone(),
        };
        Ok(curve_flow::run(initial, &spec, &c.quantity_set(), &opts)?.record)
    };
    match attempt() {
        Ok(record) => finish(&dir, &record, sink.plots, json!({})),
        Err(e) => record_failure(&dir, "curve_flow", config, &e),
    }
}

pub fn axisym_flow(c: &AxisymFlowConfig, config: Value, sink: &Sink) -> Result<i32> {
    let dir = output::create_run_dir(&sink.root, "axisym_flow")?;
    let attempt = || -> Result<RunRecord> {
        let speed = c.speed.build()?;
        let initial = c.initial.build(c.speed.n, c.resolution, c.diff)?;
        let opts = AxisymOptions {
            time_step: c.time_step,
            cadence: c.cadence,
            max_steps: c.max_steps,
            keep_states: false,
            config: config.clone(),
        };
        Ok(axisym_flow::axi_run(initial, &speed, &c.stops, &c.quantity_set(), &opts)?.record)
    };
    match attempt() {
        Ok(record) => finish(&dir, &record, sink.plots, json!({})),
        Err(e) => record_failure(&dir, "axisym_flow", config, &e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ProjectTo {
    /// Sphere curve `(theta, rho)` to planar curve `(theta, r)`.
    Plane,
    /// Planar curve `(theta, r)` to sphere curve `(theta, rho)`.
    Sphere,
}

/// Converts between sphere and plane curve files through central
/// projection. Output columns are the angle, the radius and the curvature.
pub fn project(input: &Path, to: ProjectTo, out: &Path) -> Result<i32> {
    let file = CurveFile::read(input)?;
    let (columns, rows): ([&str; 3], Vec<Vec<f64>>) = match to {
        ProjectTo::Plane => {
            let rho = file.values_on_grid("rho", TAU, false)?;
            let c = RadialCurve::new(rho, 0.0, DiffMode::Spectral)?;
            let p = gnomonic::from_sphere(&c)?;
            (
                ["theta", "r", "kappa"],
                (0..p.len()).map(|i| vec![p.theta(i), p.rho_bar[i], p.kappa_bar[i]]).collect(),
            )
        }
        ProjectTo::Sphere => {
            let r = file.values_on_grid("r", TAU, false)?;
            let p = PlanarRadialCurve::new(r, 0.0, DiffMode::Spectral)?;
            let c = gnomonic::to_sphere(&p)?;
            (
                ["theta", "rho", "kappa"],
                (0..c.len()).map(|i| vec![c.theta(i), c.rho[i], c.kappa[i]]).collect(),
            )
        }
    };
    output::write_table(out, &columns, &rows)?;
    println!("{}", json!({ "output": out, "nodes": rows.len() }));
    Ok(0)
}

pub struct XcheckArgs {
    pub pair: EquivalencePair,
    pub horizon: f64,
    pub resolution: usize,
    pub snapshots: usize,
    /// Planar curve file; an ellipse with these semi-axes otherwise.
    pub input: Option<PathBuf>,
    pub axes: (f64, f64),
}

pub fn xcheck(a: &XcheckArgs, sink: &Sink) -> Result<i32> {
    let initial = match &a.input {
        Some(path) => {
            let file = CurveFile::read(path)?;
            PlanarRadialCurve::new(file.values_on_grid("r", TAU, false)?, 0.0, DiffMode::Spectral)?
        }
        None => PlanarRadialCurve::ellipse(a.resolution, a.axes.0, a.axes.1, DiffMode::Spectral)?,
    };
    let report = gnomonic::equivalence_check(a.pair, &initial, a.horizon, a.snapshots)?;
    let dir = output::create_run_dir(&sink.root, "xcheck")?;
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(dir.join("gap_report.json"), &text)?;
    if sink.plots {
        fs::create_dir_all(dir.join("plots"))?;
        let points = report.per_snapshot.iter().map(|s| (s.t, s.gap)).collect();
        let svg = plot::line_chart("radial gap", "t", "gap", &[Line { label: "max gap".into(), points }], false);
        fs::write(dir.join("plots").join("gap.svg"), svg)?;
    }
    println!("{text}");
    Ok(0)
}

/// `"D"` or `"DxA"`: numbers of tilt angles and azimuths.
pub fn parse_grid(s: &str) -> std::result::Result<VGrid, String> {
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| format!("expected a positive count, got `{t}`"))
    };
    match s.split_once(['x', 'X']) {
        Some((d, a)) => Ok(VGrid { deltas: parse(d)?, azimuths: parse(a)? }),
        None => {
            let d = parse(s)?;
            Ok(VGrid { deltas: d, azimuths: d })
        }
    }
}

/// Reads a curve snapshot `(theta, rho, ...)` or an axisymmetric snapshot
/// `(psi, u, ...)`; the latter needs the dimension.
fn read_shape(path: &Path, n: usize) -> Result<Shape> {
    let file = CurveFile::read(path)?;
    if file.columns[0] == "psi" {
        let u = file.values_on_grid("u", PI, true)?;
        Ok(Shape::from_axisym(&AxisymGraph::new(n, u, 0.0, DiffMode::Spectral)?))
    } else {
        let rho = file.values_on_grid("rho", TAU, false)?;
        Ok(Shape::from_curve(&RadialCurve::new(rho, 0.0, DiffMode::Spectral)?))
    }
}

/// Exit 0 when every grid direction reflects above, 1 otherwise.
pub fn reflect_check(input: &Path, delta0: f64, delta1: f64, grid: VGrid, n: usize) -> Result<i32> {
    let shape = read_shape(input, n)?;
    let report = reflection::reflect_check(&shape, delta0, delta1, grid)?;
    let out = json!({
        "verdict": report.verdict,
        "min_margin": report.min_margin,
        "worst_V": report.worst_v,
        "all_star_shaped": report.all_star_shaped,
        "checked": report.checked,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if report.verdict { 0 } else { 1 })
}

pub fn verify(suite: Suite, only: &[String], sink: &Sink) -> Result<i32> {
    let dir = output::create_run_dir(&sink.root, "verify")?;
    let report = sphereflow_verify::run_suite(suite, only, Some(&dir));
    for c in &report.criteria {
        println!("{}", c.line());
    }
    println!(
        "{} ({} criteria, {:.1}s); report at {}",
        if report.passed { "ALL PASS" } else { "SOME FAILED" },
        report.criteria.len(),
        report.wall_time_seconds,
        dir.join("report.json").display()
    );
    Ok(if report.passed { 0 } else { 1 })
}
