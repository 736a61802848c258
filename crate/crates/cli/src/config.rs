//! TOML configuration for `simulate`, `sweep` and `nash`.
//!
//! Every table rejects unknown keys, and every error carries the dotted
//! path of the offending key (`params.sigma`, `integrator.dt`, ...).

use std::path::{Path, PathBuf};

use csflock_core::diagnostics::default_grid;
use csflock_core::dynamics::{IntegratorSpec, Probes};
use csflock_core::model::{self, FlockState, Kernel, SystemParams, Violation};
use csflock_core::nash::OpinionGame;
use csflock_core::scenarios::{self, FatTail, HaScenario, ScenarioError, SpreadKnobs};
use serde::de::DeserializeOwned;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{0}")]
    Syntax(String),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    /// Dotted key path for schema and validation errors.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { path, .. } => Some(path),
            _ => None,
        }
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.into(), message: message.into() }
}

fn join(base: &str, key: &str) -> String {
    if base.is_empty() || base == "." {
        key.to_string()
    } else {
        format!("{base}.{key}")
    }
}

/// Name inside the first pair of backticks of a serde message.
fn quoted(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|err| {
        let base = err.path().to_string();
        let message = err.inner().message().to_string();
        // unknown keys are already part of the path, missing ones are not
        let path = if message.starts_with("missing field") {
            match quoted(&message) {
                Some(key) => join(&base, key),
                None => base,
            }
        } else {
            base
        };
        invalid(path, message)
    })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Ha,
    FatTail,
    RandomSectorial,
    Random,
    Explicit,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Ha => "ha",
            ScenarioKind::FatTail => "fat-tail",
            ScenarioKind::RandomSectorial => "random-sectorial",
            ScenarioKind::Random => "random",
            ScenarioKind::Explicit => "explicit",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: Option<ScenarioKind>,
    lambda: Option<f64>,
    v0: Option<f64>,
    beta: Option<f64>,
    r0: Option<f64>,
    x1: Option<f64>,
    v1: Option<f64>,
    v2: Option<f64>,
    seed: Option<u64>,
    agents: Option<usize>,
    dim: Option<usize>,
    epsilon: Option<f64>,
    position_spread: Option<f64>,
    speed_range: Option<[f64; 2]>,
    theta_range: Option<[f64; 2]>,
    mass_range: Option<[f64; 2]>,
    positions: Option<Vec<Vec<f64>>>,
    velocities: Option<Vec<Vec<f64>>>,
    theta: Option<Vec<f64>>,
    mass: Option<Vec<f64>>,
}

impl RawScenario {
    /// Keys that are set, by name.
    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        macro_rules! note {
            ($($f:ident),*) => { $( if self.$f.is_some() { keys.push(stringify!($f)); } )* };
        }
        note!(
            lambda, v0, beta, r0, x1, v1, v2, seed, agents, dim, epsilon, position_spread, speed_range,
            theta_range, mass_range, positions, velocities, theta, mass
        );
        keys
    }

    fn allowed(kind: ScenarioKind) -> &'static [&'static str] {
        const RANDOM: &[&str] = &["seed", "agents", "dim", "position_spread", "speed_range", "theta_range", "mass_range"];
        const SECTORIAL: &[&str] =
            &["seed", "agents", "dim", "epsilon", "position_spread", "speed_range", "theta_range", "mass_range"];
        match kind {
            ScenarioKind::Ha => &["lambda", "v0"],
            ScenarioKind::FatTail => &["beta", "r0", "x1", "v1", "v2"],
            ScenarioKind::RandomSectorial => SECTORIAL,
            ScenarioKind::Random => RANDOM,
            ScenarioKind::Explicit => &["positions", "velocities", "theta", "mass"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum KernelKind {
    Uniform,
    SmoothPower,
    TruncatedPower,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    kind: KernelKind,
    level: Option<f64>,
    lambda: Option<f64>,
    beta: Option<f64>,
    r0: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    sigma: f64,
    kappa: Option<f64>,
    p: Option<f64>,
    kernel: Option<RawKernel>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    dt: Option<f64>,
    t_final: Option<f64>,
    record_every: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    enabled: Option<bool>,
    gamma2d_grid: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFit {
    window: Option<[f64; 2]>,
    angle_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    Sigma,
    Kappa,
    P,
    Lambda,
    Seed,
    Epsilon,
    Dt,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Sigma => "sigma",
            SweepParameter::Kappa => "kappa",
            SweepParameter::P => "p",
            SweepParameter::Lambda => "lambda",
            SweepParameter::Seed => "seed",
            SweepParameter::Epsilon => "epsilon",
            SweepParameter::Dt => "dt",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: SweepParameter,
    values: Vec<f64>,
}

/// Invariant checks a run can be gated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    ThetaConservation,
    VelocityBound,
    SectorPreserved,
    DiameterBounded,
    Misaligned,
    Grassmann,
}

impl CheckKind {
    /// Key under which the outcome appears in `report.txt`.
    pub fn report_key(self) -> &'static str {
        match self {
            CheckKind::ThetaConservation => "theta_mean_conserved",
            CheckKind::VelocityBound => "velocity_bounded",
            CheckKind::SectorPreserved => "sector_preserved",
            CheckKind::DiameterBounded => "flock_diameter_bounded",
            CheckKind::Misaligned => "misaligned",
            CheckKind::Grassmann => "grassmann_inequality",
        }
    }

    fn defaults(kind: ScenarioKind) -> Vec<CheckKind> {
        use CheckKind::*;
        match kind {
            ScenarioKind::Ha | ScenarioKind::Explicit | ScenarioKind::Random => vec![ThetaConservation, VelocityBound],
            ScenarioKind::FatTail => vec![VelocityBound, Misaligned],
            ScenarioKind::RandomSectorial => {
                vec![ThetaConservation, VelocityBound, SectorPreserved, DiameterBounded, Grassmann]
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    name: Option<String>,
    scenario: RawScenario,
    params: RawParams,
    #[serde(default)]
    integrator: RawIntegrator,
    #[serde(default)]
    diagnostics: RawDiagnostics,
    #[serde(default)]
    fit: RawFit,
    checks: Option<Vec<CheckKind>>,
    #[serde(default)]
    output: RawOutput,
    sweep: Option<RawSweep>,
}

/// Built-in scenario with whatever the report needs to know about it.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Ha(HaScenario),
    FatTail(FatTail),
    RandomSectorial { seed: u64, epsilon: f64 },
    Random { seed: u64 },
    Explicit,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Ha(_) => "ha",
            Scenario::FatTail(_) => "fat-tail",
            Scenario::RandomSectorial { .. } => "random-sectorial",
            Scenario::Random { .. } => "random",
            Scenario::Explicit => "explicit",
        }
    }
}

/// Rate-fit windows. `None` means the second half of the run for spreads,
/// and for the angle series the second half of the stretch on which it
/// stays above `angle_floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSpec {
    pub window: Option<(f64, f64)>,
    pub angle_floor: f64,
}

pub const DEFAULT_ANGLE_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// A validated `simulate`/`sweep` configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub scenario: Scenario,
    pub state: FlockState,
    pub params: SystemParams,
    pub integrator: IntegratorSpec,
    pub probes: Probes,
    pub fit: FitSpec,
    pub checks: Vec<CheckKind>,
    pub output_dir: Option<PathBuf>,
    pub sweep: Option<SweepSpec>,
    raw: RawRun,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read(path)?, &stem(path))
    }

    /// Parses a run document; `default_name` is used when `name` is absent.
    pub fn parse(text: &str, default_name: &str) -> Result<Self, ConfigError> {
        let raw: RawRun = parse_toml(text)?;
        Self::build(raw, default_name)
    }

    /// Same configuration with one swept parameter replaced.
    pub fn with_override(&self, parameter: SweepParameter, value: f64) -> Result<Self, ConfigError> {
        let mut raw = self.raw.clone();
        raw.sweep = None;
        let kind = raw.scenario.kind;
        match parameter {
            SweepParameter::Sigma => raw.params.sigma = value,
            SweepParameter::Kappa => raw.params.kappa = Some(value),
            SweepParameter::P => raw.params.p = Some(value),
            SweepParameter::Dt => raw.integrator.dt = Some(value),
            SweepParameter::Epsilon => raw.scenario.epsilon = Some(value),
            SweepParameter::Seed => {
                if !(value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                    return Err(invalid("sweep.values", format!("seed {value} is not a nonnegative integer")));
                }
                raw.scenario.seed = Some(value as u64);
            }
            SweepParameter::Lambda => match (kind, raw.params.kernel.as_mut()) {
                (Some(ScenarioKind::Ha), _) => raw.scenario.lambda = Some(value),
                (_, Some(k)) if k.kind == KernelKind::SmoothPower => k.lambda = Some(value),
                (_, Some(k)) if k.kind == KernelKind::Uniform => k.level = Some(value),
                _ => return Err(invalid("sweep.parameter", "lambda sweep needs an ha scenario or a uniform/smooth-power kernel")),
            },
        }
        Self::build(raw, &self.name)
    }

    fn build(raw: RawRun, default_name: &str) -> Result<Self, ConfigError> {
        let kind = raw.scenario.kind.ok_or_else(|| invalid("scenario.kind", "missing field `kind`"))?;
        let allowed = RawScenario::allowed(kind);
        if let Some(key) = raw.scenario.present().into_iter().find(|k| !allowed.contains(k)) {
            return Err(invalid(
                format!("scenario.{key}"),
                format!("not used by scenario kind `{}`", kind.name()),
            ));
        }
        let sc = &raw.scenario;
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| invalid(format!("scenario.{key}"), "missing field"));
        let kappa = raw.params.kappa.unwrap_or(0.0);
        let p = raw.params.p.unwrap_or(2.0);

        let (scenario, state, params) = match kind {
            ScenarioKind::Ha | ScenarioKind::FatTail => {
                fixed_params(&raw.params, kind)?;
                if kind == ScenarioKind::Ha {
                    let scn = HaScenario::new(need(sc.lambda, "lambda")?, raw.params.sigma, need(sc.v0, "v0")?)
                        .map_err(scenario_error)?;
                    let (state, params) = scenarios::ha_flock_config(&scn);
                    (Scenario::Ha(scn), state, params)
                } else {
                    let mut ft = FatTail::new(need(sc.beta, "beta")?, need(sc.r0, "r0")?, need(sc.x1, "x1")?, need(sc.v1, "v1")?);
                    if let Some(v2) = sc.v2 {
                        ft.v2 = v2;
                    }
                    ft.sigma = raw.params.sigma;
                    let (state, params) = scenarios::fat_tail_config(&ft).map_err(scenario_error)?;
                    (Scenario::FatTail(ft), state, params)
                }
            }
            ScenarioKind::RandomSectorial | ScenarioKind::Random => {
                let kernel = kernel(&raw.params)?;
                let seed = sc.seed.unwrap_or(0);
                let agents = sc.agents.ok_or_else(|| invalid("scenario.agents", "missing field"))?;
                let dim = sc.dim.ok_or_else(|| invalid("scenario.dim", "missing field"))?;
                let defaults = SpreadKnobs::default();
                let knobs = SpreadKnobs {
                    position_spread: sc.position_spread.unwrap_or(defaults.position_spread),
                    speed_range: sc.speed_range.map_or(defaults.speed_range, |[a, b]| (a, b)),
                    theta_range: sc.theta_range.map_or(defaults.theta_range, |[a, b]| (a, b)),
                    mass_range: sc.mass_range.map(|[a, b]| (a, b)),
                };
                let params = SystemParams { sigma: raw.params.sigma, kappa, p, kernel };
                if kind == ScenarioKind::RandomSectorial {
                    let epsilon = need(sc.epsilon, "epsilon")?;
                    let state = scenarios::random_sectorial(seed, agents, dim, epsilon, &knobs).map_err(scenario_error)?;
                    (Scenario::RandomSectorial { seed, epsilon }, state, params)
                } else {
                    let state = scenarios::random_state(seed, agents, dim, &knobs).map_err(scenario_error)?;
                    (Scenario::Random { seed }, state, params)
                }
            }
            ScenarioKind::Explicit => {
                let kernel = kernel(&raw.params)?;
                let positions = sc.positions.clone().ok_or_else(|| invalid("scenario.positions", "missing field"))?;
                let velocities = sc.velocities.clone().ok_or_else(|| invalid("scenario.velocities", "missing field"))?;
                let theta = sc.theta.clone().ok_or_else(|| invalid("scenario.theta", "missing field"))?;
                let agents = theta.len();
                let mass = sc.mass.clone().unwrap_or_else(|| vec![1.0 / agents.max(1) as f64; agents]);
                let state = FlockState::from_rows(&positions, &velocities, theta, mass)
                    .map_err(|e| invalid("scenario.positions", e.to_string()))?;
                let params = SystemParams { sigma: raw.params.sigma, kappa, p, kernel };
                (Scenario::Explicit, state, params)
            }
        };
        model::validate(&state, &params).map_err(violation)?;

        let defaults = IntegratorSpec::default();
        let integrator = IntegratorSpec {
            dt: raw.integrator.dt.unwrap_or(defaults.dt),
            t_final: raw.integrator.t_final.unwrap_or(defaults.t_final),
            record_every: raw.integrator.record_every.unwrap_or(defaults.record_every),
        };
        if !(integrator.dt > 0.0 && integrator.dt.is_finite()) {
            return Err(invalid("integrator.dt", format!("must be positive, got {}", integrator.dt)));
        }
        if !(integrator.t_final >= integrator.dt && integrator.t_final.is_finite()) {
            return Err(invalid("integrator.t_final", "must be finite and at least dt"));
        }
        if integrator.record_every == 0 {
            return Err(invalid("integrator.record_every", "must be positive"));
        }

        let grid = match raw.diagnostics.gamma2d_grid {
            Some(0) => None,
            Some(g) => Some(g),
            None => Some(default_grid(state.dim())),
        };
        let probes = Probes { frames: raw.diagnostics.enabled.unwrap_or(true), gamma2d_grid: grid };

        let window = raw.fit.window.map(|[a, b]| (a, b));
        if let Some((a, b)) = window {
            if !(a < b) {
                return Err(invalid("fit.window", "window start must precede its end"));
            }
        }
        let angle_floor = raw.fit.angle_floor.unwrap_or(DEFAULT_ANGLE_FLOOR);
        if !(angle_floor > 0.0) {
            return Err(invalid("fit.angle_floor", "must be positive"));
        }

        let sweep = match &raw.sweep {
            Some(s) if s.values.is_empty() => return Err(invalid("sweep.values", "must not be empty")),
            Some(s) => Some(SweepSpec { parameter: s.parameter, values: s.values.clone() }),
            None => None,
        };

        let checks = raw.checks.clone().unwrap_or_else(|| CheckKind::defaults(kind));
        if kind != ScenarioKind::FatTail && checks.contains(&CheckKind::Misaligned) {
            return Err(invalid("checks", "`misaligned` needs scenario kind `fat-tail`"));
        }

        Ok(RunConfig {
            name: raw.name.clone().unwrap_or_else(|| default_name.to_string()),
            checks,
            output_dir: raw.output.dir.clone(),
            fit: FitSpec { window, angle_floor },
            scenario,
            state,
            params,
            integrator,
            probes,
            sweep,
            raw,
        })
    }
}

/// The two closed-form scenarios fix everything but `σ`.
fn fixed_params(raw: &RawParams, kind: ScenarioKind) -> Result<(), ConfigError> {
    let why = format!("fixed by scenario kind `{}`", kind.name());
    if raw.kernel.is_some() {
        return Err(invalid("params.kernel", why));
    }
    if raw.kappa.is_some_and(|k| k != 0.0) {
        return Err(invalid("params.kappa", why));
    }
    if raw.p.is_some_and(|p| p != 2.0) {
        return Err(invalid("params.p", why));
    }
    Ok(())
}

fn kernel(raw: &RawParams) -> Result<Kernel, ConfigError> {
    let k = raw.kernel.as_ref().ok_or_else(|| invalid("params.kernel", "missing field"))?;
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| invalid(format!("params.kernel.{key}"), "missing field"));
    let unused = |v: Option<f64>, key: &str| match v {
        Some(_) => Err(invalid(format!("params.kernel.{key}"), "not used by this kernel kind")),
        None => Ok(()),
    };
    Ok(match k.kind {
        KernelKind::Uniform => {
            unused(k.lambda, "lambda")?;
            unused(k.beta, "beta")?;
            unused(k.r0, "r0")?;
            Kernel::Uniform { level: need(k.level, "level")? }
        }
        KernelKind::SmoothPower => {
            unused(k.level, "level")?;
            unused(k.r0, "r0")?;
            Kernel::SmoothPower { lambda: need(k.lambda, "lambda")?, beta: need(k.beta, "beta")? }
        }
        KernelKind::TruncatedPower => {
            unused(k.level, "level")?;
            unused(k.lambda, "lambda")?;
            Kernel::TruncatedExactPower { beta: need(k.beta, "beta")?, r0: need(k.r0, "r0")? }
        }
    })
}

fn violation(v: Violation) -> ConfigError {
    let path = match v.agent {
        Some(i) => {
            let table = match v.field {
                "position" => "positions",
                "velocity" => "velocities",
                other => other,
            };
            format!("scenario.{table}[{i}]")
        }
        None => format!("params.{}", v.field),
    };
    invalid(path, format!("invalid value {}", v.value))
}

fn scenario_error(e: ScenarioError) -> ConfigError {
    match e {
        ScenarioError::Invalid { field: "sigma", value } => invalid("params.sigma", format!("invalid value {value}")),
        ScenarioError::Invalid { field, value } => invalid(format!("scenario.{field}"), format!("invalid value {value}")),
        ScenarioError::Precondition { inequality, lhs, rhs } => {
            invalid("scenario", format!("precondition {inequality} violated ({lhs} vs {rhs})"))
        }
        ScenarioError::InsideCore { .. } => invalid("scenario.x1", e.to_string()),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGame {
    theta: Vec<f64>,
    mass: Option<Vec<f64>>,
    sigma: f64,
    p: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    multistart: Option<usize>,
    seed: Option<u64>,
    verify_grid: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSigmaSweep {
    sigmas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGameConfig {
    name: Option<String>,
    game: RawGame,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    sweep: RawSigmaSweep,
    #[serde(default)]
    output: RawOutput,
}

/// A validated `nash` configuration.
#[derive(Debug, Clone)]
pub struct GameConfig {
    pub name: String,
    pub game: OpinionGame,
    pub multistart: usize,
    pub seed: u64,
    pub verify_grid: usize,
    pub sigmas: Vec<f64>,
    pub output_dir: Option<PathBuf>,
}

impl GameConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read(path)?, &stem(path))
    }

    pub fn parse(text: &str, default_name: &str) -> Result<Self, ConfigError> {
        let raw: RawGameConfig = parse_toml(text)?;
        let n = raw.game.theta.len();
        let mass = raw.game.mass.unwrap_or_else(|| vec![1.0; n]);
        let game = OpinionGame::new(raw.game.theta, mass, raw.game.sigma, raw.game.p.unwrap_or(2.0)).map_err(|e| {
            use csflock_core::nash::NashError;
            match e {
                NashError::InvalidGame { field: "theta/mass lengths", .. } => {
                    invalid("game.mass", "must match game.theta in length and be nonempty")
                }
                NashError::InvalidGame { field, index: Some(i) } => invalid(format!("game.{field}[{i}]"), "must be positive"),
                NashError::InvalidGame { field, index: None } => invalid(format!("game.{field}"), "must be positive"),
                other => invalid("game", other.to_string()),
            }
        })?;
        let verify_grid = raw.solver.verify_grid.unwrap_or(201);
        if verify_grid < 2 {
            return Err(invalid("solver.verify_grid", "needs at least two points"));
        }
        let sigmas = raw.sweep.sigmas.unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]);
        if let Some(i) = sigmas.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid(format!("sweep.sigmas[{i}]"), "must be positive"));
        }
        Ok(GameConfig {
            name: raw.name.unwrap_or_else(|| default_name.to_string()),
            game,
            multistart: raw.solver.multistart.unwrap_or(100),
            seed: raw.solver.seed.unwrap_or(0),
            verify_grid,
            sigmas,
            output_dir: raw.output.dir,
        })
    }
}
