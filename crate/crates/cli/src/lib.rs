//! Command-line front end: argument parsing and exit codes.
//!
//! Exit status is 0 on success, 1 on a failed run or check and 2 on a bad
//! command line or configuration.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sphereflow::curve_flow::{InitialCurve, StopRules, TimeStepPolicy, DEFAULT_CFL};
use sphereflow::axisym_flow::InitialAxisym;
use sphereflow::gnomonic::EquivalencePair;
use sphereflow::spectral::DiffMode;
use sphereflow::SpeedSpec;
use sphereflow_verify::Suite;

use commands::{ProjectTo, Sink, XcheckArgs};
use config::{AxisymFlowConfig, CurveFlowConfig, Direction, FlowName, RunConfig, RunSpec, SphereOdeConfig};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "sphereflow", version, about = "Contracting curvature flows in the round sphere")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output root; overrides SPHEREFLOW_OUT.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    pub plots: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SpeedArgs {
    /// Speed family: H, H^p, norm_of_A, power_mean, sigma_k_root.
    #[arg(long, default_value = "H")]
    pub speed: String,
    /// Family parameter (repeatable).
    #[arg(long = "param", allow_negative_numbers = true)]
    pub params: Vec<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct StepArgs {
    /// CFL constant of the explicit step rule.
    #[arg(long, conflicts_with = "dt")]
    pub cfl: Option<f64>,
    /// Fixed time step.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub max_time: Option<f64>,
    #[arg(long)]
    pub max_kappa: Option<f64>,
    #[arg(long)]
    pub pole_margin: Option<f64>,
    /// Record a diagnostics row every this many steps.
    #[arg(long, default_value_t = 1)]
    pub cadence: usize,
    #[arg(long, default_value_t = 5_000_000)]
    pub max_steps: usize,
    #[arg(long, value_enum, default_value = "spectral")]
    pub diff: DiffArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum DiffArg {
    Spectral,
    FiniteDifference,
}

impl From<DiffArg> for DiffMode {
    fn from(d: DiffArg) -> Self {
        match d {
            DiffArg::Spectral => DiffMode::Spectral,
            DiffArg::FiniteDifference => DiffMode::FiniteDifference,
        }
    }
}

impl StepArgs {
    fn time_step(&self) -> TimeStepPolicy {
        match (self.dt, self.cfl) {
            (Some(dt), _) => TimeStepPolicy::Fixed(dt),
            (None, c) => TimeStepPolicy::ExplicitCfl(c.unwrap_or(DEFAULT_CFL)),
        }
    }

    fn stops(&self) -> StopRules {
        let mut s = StopRules::default();
        if let Some(v) = self.max_time {
            s.max_time = v;
        }
        if let Some(v) = self.max_kappa {
            s.max_kappa = v;
        }
        if let Some(v) = self.pole_margin {
            s.pole_margin = v;
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SuiteArg {
    Fast,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PairArg {
    CsfOval,
    AffineEllipse,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Radius of a shrinking geodesic sphere.
    SphereOde {
        #[command(flatten)]
        speed: SpeedArgs,
        /// Hypersurface dimension.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        r0: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_enum, default_value = "forward")]
        direction: Direction,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Evolves a closed curve given as a radial graph about the pole.
    CurveFlow {
        #[arg(long, value_enum, default_value = "geometric")]
        flow: FlowName,
        #[command(flatten)]
        speed: SpeedArgs,
        /// Initial curve as JSON, e.g. '{"kind":"circle","radius":1.0}'.
        #[arg(long, required_unless_present = "initial_csv", conflicts_with = "initial_csv")]
        initial: Option<String>,
        /// CSV of (theta, rho) pairs on a uniform grid.
        #[arg(long)]
        initial_csv: Option<PathBuf>,
        /// Number of nodes.
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        /// Time of an extra snapshot (repeatable).
        #[arg(long = "checkpoint")]
        checkpoints: Vec<f64>,
        #[arg(long)]
        snapshot_every: Option<usize>,
        #[command(flatten)]
        step: StepArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Evolves a rotationally symmetric hypersurface.
    AxisymFlow {
        /// Hypersurface dimension, at least 2.
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[command(flatten)]
        speed: SpeedArgs,
        /// Initial profile as JSON, e.g. '{"kind":"sphere","radius":1.0}'.
        #[arg(long)]
        initial: String,
        /// Number of intervals on the profile.
        #[arg(long, default_value_t = 128)]
        resolution: usize,
        #[command(flatten)]
        step: StepArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Central projection between sphere and plane curve files.
    Project {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        to: ProjectTo,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compares a planar flow, projected, with its spherical counterpart.
    Xcheck {
        #[arg(long, value_enum)]
        pair: PairArg,
        #[arg(long, default_value_t = 0.3)]
        horizon: f64,
        #[arg(long, default_value_t = 512)]
        resolution: usize,
        #[arg(long, default_value_t = 6)]
        snapshots: usize,
        /// Planar curve file (theta, r); an ellipse otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Ellipse semi-axes "a,b".
        #[arg(long, default_value = "2,1")]
        axes: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// One-sided reflection test over a grid of reflection directions.
    ReflectCheck {
        /// Curve snapshot (theta, rho, ...) or axisymmetric snapshot (psi, u, ...).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        delta0: f64,
        #[arg(long)]
        delta1: f64,
        /// Tilt angles by azimuths, "DxA" or "D".
        #[arg(long, default_value = "64x32", value_parser = commands::parse_grid)]
        grid: sphereflow::reflection::VGrid,
        /// Dimension for axisymmetric snapshots.
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Runs the acceptance suite.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        suite: SuiteArg,
        /// Run only this criterion (repeatable), e.g. c04.
        #[arg(long)]
        only: Vec<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Runs a JSON configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn speed_spec(a: &SpeedArgs, n: usize) -> SpeedSpec {
    SpeedSpec {
        family: a.speed.clone(),
        params: a.params.clone(),
        n,
    }
}

fn json_arg<T: serde::de::DeserializeOwned>(flag: &str, text: &str) -> Result<T, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Failure::Usage(format!("--{flag}: {e}")))
}

/// Validates a configuration assembled from flags, as if read from a file.
fn checked(cfg: RunConfig) -> Result<RunConfig, Failure> {
    config::validate(&cfg).map_err(Failure::Usage)?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    let from_flags = |run: RunSpec, out: &OutArgs| -> Result<i32, Failure> {
        let cfg = checked(RunConfig {
            schema_version: config::CONFIG_SCHEMA_VERSION,
            seed: 0,
            output: out.out.clone(),
            plots: out.plots,
            run,
        })?;
        let sink = Sink::new(cfg.output.as_deref(), cfg.plots);
        Ok(commands::run_config(&cfg, &sink)?)
    };
    match cli.command {
        Command::SphereOde { speed, n, r0, tol, direction, out } => from_flags(
            RunSpec::SphereOde(SphereOdeConfig {
                speed: speed_spec(&speed, n),
                r0,
                tol,
                direction,
            }),
            &out,
        ),
        Command::CurveFlow {
            flow,
            speed,
            initial,
            initial_csv,
            resolution,
            checkpoints,
            snapshot_every,
            step,
            out,
        } => {
            let initial: Option<InitialCurve> = initial.map(|t| json_arg("initial", &t)).transpose()?;
            from_flags(
                RunSpec::CurveFlow(CurveFlowConfig {
                    flow,
                    speed: (flow == FlowName::Geometric).then(|| speed_spec(&speed, 1)),
                    initial,
                    initial_csv,
                    resolution,
                    diff: step.diff.into(),
                    time_step: step.time_step(),
                    stops: step.stops(),
                    quantities: None,
                    cadence: step.cadence,
                    checkpoints,
                    snapshot_every,
                    max_steps: step.max_steps,
                }),
                &out,
            )
        }
        Command::AxisymFlow { n, speed, initial, resolution, step, out } => {
            let initial: InitialAxisym = json_arg("initial", &initial)?;
            from_flags(
                RunSpec::AxisymFlow(AxisymFlowConfig {
                    speed: speed_spec(&speed, n),
                    initial,
                    resolution,
                    diff: step.diff.into(),
                    time_step: step.time_step(),
                    stops: step.stops(),
                    quantities: None,
                    cadence: step.cadence,
                    max_steps: step.max_steps,
                }),
                &out,
            )
        }
        Command::Project { input, to, output } => Ok(commands::project(&input, to, &output)?),
        Command::Xcheck { pair, horizon, resolution, snapshots, input, axes, out } => {
            let parsed: Vec<f64> = axes
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::Usage(format!("--axes: {e}")))?;
            let [a, b] = parsed[..] else {
                return Err(Failure::Usage(format!("--axes: expected \"a,b\", got `{axes}`")));
            };
            let args = XcheckArgs {
                pair: match pair {
                    PairArg::CsfOval => EquivalencePair::CsfOval,
                    PairArg::AffineEllipse => EquivalencePair::AffineEllipse,
                },
                horizon,
                resolution,
                snapshots,
                input,
                axes: (a, b),
            };
            Ok(commands::xcheck(&args, &Sink::new(out.out.as_deref(), out.plots))?)
        }
        Command::ReflectCheck { input, delta0, delta1, grid, n } => {
            Ok(commands::reflect_check(&input, delta0, delta1, grid, n)?)
        }
        Command::Verify { suite, only, out } => {
            if let Some(bad) = only
                .iter()
                .find(|o| !sphereflow_verify::CRITERIA.iter().any(|c| c.id == o.as_str()))
            {
                return Err(Failure::Usage(format!("--only: unknown criterion `{bad}`")));
            }
            let suite = match suite {
                SuiteArg::Fast => Suite::Fast,
                SuiteArg::Full => Suite::Full,
            };
            Ok(commands::verify(suite, &only, &Sink::new(out.out.as_deref(), out.plots))?)
        }
        Command::Run { config: path, out } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let cfg = config::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let sink = Sink::new(out.out.as_deref().or(cfg.output.as_deref()), out.plots || cfg.plots);
            Ok(commands::run_config(&cfg, &sink)?)
        }
    }
}

/// Runs the command line and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("configuration error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}
