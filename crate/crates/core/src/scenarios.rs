//! Built-in configurations: the two-agent line (with its closed form), the
//! mirrored fat-tail pair, and seeded random flocks.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::gaussian;
use crate::model::{FlockState, Kernel, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaRegime {
    /// `λ < σ`: the pair keeps a nonzero speed, no flocking.
    Persistent,
    /// `λ = σ`: algebraic decay `v ~ t^{-1/2}`, positions diverge like `√t`.
    Critical,
    /// `λ > σ`: exponential decay at rate `λ − σ`.
    Flocking,
}

/// Two agents on a line with `v_1 = −v_2 = v > 0`, which reduces the flock
/// to `v̇ = −λv + σv(1 − v²)`.
///
/// The fields are public so oracles can evaluate boundary data such as
/// `v0 = 1`; [`HaScenario::new`] enforces `v0 ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaScenario {
    pub lambda: f64,
    pub sigma: f64,
    pub v0: f64,
}

impl HaScenario {
    pub fn new(lambda: f64, sigma: f64, v0: f64) -> Result<Self, ScenarioError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ScenarioError::Invalid { field: "lambda", value: lambda });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ScenarioError::Invalid { field: "sigma", value: sigma });
        }
        if !(v0 > 0.0 && v0 < 1.0) {
            return Err(ScenarioError::Invalid { field: "v0", value: v0 });
        }
        Ok(HaScenario { lambda, sigma, v0 })
    }

    pub fn regime(&self) -> HaRegime {
        if self.lambda < self.sigma {
            HaRegime::Persistent
        } else if self.lambda == self.sigma {
            HaRegime::Critical
        } else {
            HaRegime::Flocking
        }
    }
}

/// Exact `v(t)` of the scalar equation, with the integration constant fixed
/// by `v(0) = v0` in each regime.
pub fn ha_closed_form(scn: &HaScenario, t: f64) -> Result<f64, ScenarioError> {
    if !(t >= 0.0) {
        return Err(ScenarioError::Invalid { field: "t", value: t });
    }
    let HaScenario { lambda, sigma, v0 } = *scn;
    Ok(match scn.regime() {
        HaRegime::Persistent => {
            let a = 1.0 - lambda / sigma;
            let k = a / (v0 * v0) - 1.0;
            a.sqrt() / (1.0 + k * (-2.0 * t * (sigma - lambda)).exp()).sqrt()
        }
        HaRegime::Critical => v0 / (2.0 * sigma * t * v0 * v0 + 1.0).sqrt(),
        HaRegime::Flocking => {
            let b = lambda / sigma - 1.0;
            let c2 = v0 * v0 / (b + v0 * v0);
            let e = (2.0 * t * (sigma - lambda)).exp();
            (c2 * e * b).sqrt() / (1.0 - c2 * e).sqrt()
        }
    })
}

/// Position of agent 1 in the critical regime, `x(0) = 0`.
pub fn ha_critical_position(sigma: f64, v0: f64, t: f64) -> f64 {
    ((2.0 * sigma * t * v0 * v0 + 1.0).sqrt() - 1.0) / (sigma * v0)
}

/// `N = 2`, `n = 1`, `m = (½, ½)`, `θ = (1, 1)`, `p = 2`, `κ = 0`,
/// uniform kernel at level `λ`, `v = (v0, −v0)`, `x = (0, 0)`.
pub fn ha_flock_config(scn: &HaScenario) -> (FlockState, SystemParams) {
    let state = FlockState::new(1, vec![0.0, 0.0], vec![scn.v0, -scn.v0], vec![1.0, 1.0], vec![0.5, 0.5])
        .expect("fixed shape");
    let params = SystemParams { sigma: scn.sigma, kappa: 0.0, p: 2.0, kernel: Kernel::Uniform { level: scn.lambda } };
    (state, params)
}

/// Parameters of the mirrored fat-tail pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FatTail {
    pub beta: f64,
    pub r0: f64,
    pub x1: f64,
    pub v1: f64,
    pub v2: f64,
    pub sigma: f64,
}

impl FatTail {
    /// `v2` defaults to `0.1 · v1` and `σ` to 1.
    pub fn new(beta: f64, r0: f64, x1: f64, v1: f64) -> Self {
        FatTail { beta, r0, x1, v1, v2: 0.1 * v1, sigma: 1.0 }
    }

    /// Lower bound `x1^{1−β}/(β − 1)` that `v1` must exceed.
    pub fn escape_speed(&self) -> f64 {
        self.x1.powf(1.0 - self.beta) / (self.beta - 1.0)
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        let fail = |inequality, lhs, rhs| Err(ScenarioError::Precondition { inequality, lhs, rhs });
        if !(self.beta > 1.0) {
            return fail("beta > 1", self.beta, 1.0);
        }
        if !(self.r0 > 0.0) {
            return fail("r0 > 0", self.r0, 0.0);
        }
        if !(self.sigma > 0.0) {
            return fail("sigma > 0", self.sigma, 0.0);
        }
        if !(self.x1 > 2.0 * self.r0) {
            return fail("x1_0 > 2*r0", self.x1, 2.0 * self.r0);
        }
        if !(self.v1 < 1.0) {
            return fail("v1_0 < 1", self.v1, 1.0);
        }
        let escape = self.escape_speed();
        if !(self.v1 > escape) {
            return fail("v1_0 > x1_0^(1-beta)/(beta-1)", self.v1, escape);
        }
        let speed = self.v1.hypot(self.v2);
        if !(speed < 1.0) {
            return fail("|v'(0)| < 1", speed, 1.0);
        }
        Ok(())
    }
}

/// `x' = (x1, 0)`, `x'' = (−x1, 0)`, `v' = (v1, v2)`, `v'' = (−v1, v2)` with
/// the truncated power kernel, `θ = (1, 1)`, `m = (½, ½)`, `p = 2`, `κ = 0`.
pub fn fat_tail_config(ft: &FatTail) -> Result<(FlockState, SystemParams), ScenarioError> {
    ft.check()?;
    let state = FlockState::new(
        2,
        vec![ft.x1, 0.0, -ft.x1, 0.0],
        vec![ft.v1, ft.v2, -ft.v1, ft.v2],
        vec![1.0, 1.0],
        vec![0.5, 0.5],
    )
    .expect("fixed shape");
    let params = SystemParams {
        sigma: ft.sigma,
        kappa: 0.0,
        p: 2.0,
        kernel: Kernel::TruncatedExactPower { beta: ft.beta, r0: ft.r0 },
    };
    Ok((state, params))
}

/// `L = v1 + x1^{1−β}/(1 − β)` read off agent 1. Requires `x1 > r0`.
pub fn fat_lyapunov(state: &FlockState, beta: f64, r0: f64) -> Result<f64, ScenarioError> {
    let x1 = state.position(0)[0];
    if !(x1 > r0) {
        return Err(ScenarioError::InsideCore { x1, r0 });
    }
    Ok(state.velocity(0)[0] + x1.powf(1.0 - beta) / (1.0 - beta))
}

/// Ranges for random flocks. Masses are `1/N` unless `mass_range` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadKnobs {
    /// Positions uniform in `[−s, s]ⁿ`.
    pub position_spread: f64,
    pub speed_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub mass_range: Option<(f64, f64)>,
}

impl Default for SpreadKnobs {
    fn default() -> Self {
        SpreadKnobs { position_spread: 1.0, speed_range: (0.5, 1.5), theta_range: (0.5, 1.5), mass_range: None }
    }
}

impl SpreadKnobs {
    fn check(&self) -> Result<(), ScenarioError> {
        let ordered = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi && hi.is_finite();
        if !(self.position_spread >= 0.0 && self.position_spread.is_finite()) {
            return Err(ScenarioError::Invalid { field: "position_spread", value: self.position_spread });
        }
        if !ordered(self.speed_range) {
            return Err(ScenarioError::Invalid { field: "speed_range", value: self.speed_range.0 });
        }
        if !ordered(self.theta_range) {
            return Err(ScenarioError::Invalid { field: "theta_range", value: self.theta_range.0 });
        }
        if let Some(r) = self.mass_range {
            if !ordered(r) {
                return Err(ScenarioError::Invalid { field: "mass_range", value: r.0 });
            }
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..k).map(|_| gaussian(rng)).collect();
        let len = crate::model::norm(&g);
        if len > 1e-12 {
            return g.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Positions, thetas and masses shared by both generators.
fn scaffold(rng: &mut ChaCha8Rng, agents: usize, dim: usize, knobs: &SpreadKnobs) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let s = knobs.position_spread;
    let positions = (0..agents * dim).map(|_| uniform(rng, (-s, s))).collect();
    let theta = (0..agents).map(|_| uniform(rng, knobs.theta_range)).collect();
    let mass = match knobs.mass_range {
        Some(r) => (0..agents).map(|_| uniform(rng, r)).collect(),
        None => vec![1.0 / agents as f64; agents],
    };
    (positions, theta, mass)
}

/// Seeded flock whose velocities all lie in the cone `vⁿ ≥ ε|v|` around
/// `e_n`. Polar angles are drawn uniformly from `[0, 0.999·arccos ε]`.
pub fn random_sectorial(
    seed: u64,
    agents: usize,
    dim: usize,
    epsilon: f64,
    knobs: &SpreadKnobs,
) -> Result<FlockState, ScenarioError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ScenarioError::Invalid { field: "epsilon", value: epsilon });
    }
    check_counts(agents, dim)?;
    knobs.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (positions, theta, mass) = scaffold(&mut rng, agents, dim, knobs);
    let max_polar = 0.999 * epsilon.acos();
    let mut velocities = Vec::with_capacity(agents * dim);
    for _ in 0..agents {
        let speed = uniform(&mut rng, knobs.speed_range);
        if dim == 1 {
            velocities.push(speed);
            continue;
        }
        let psi = rng.random_range(0.0..max_polar);
        let around = unit_vector(&mut rng, dim - 1);
        velocities.extend(around.iter().map(|u| speed * psi.sin() * u));
        velocities.push(speed * psi.cos());
    }
    Ok(FlockState::new(dim, positions, velocities, theta, mass).expect("generated shapes agree"))
}

/// Seeded flock with isotropic velocity directions.
pub fn random_state(seed: u64, agents: usize, dim: usize, knobs: &SpreadKnobs) -> Result<FlockState, ScenarioError> {
    check_counts(agents, dim)?;
    knobs.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (positions, theta, mass) = scaffold(&mut rng, agents, dim, knobs);
    let mut velocities = Vec::with_capacity(agents * dim);
    for _ in 0..agents {
        let speed = uniform(&mut rng, knobs.speed_range);
        velocities.extend(unit_vector(&mut rng, dim).into_iter().map(|u| speed * u));
    }
    Ok(FlockState::new(dim, positions, velocities, theta, mass).expect("generated shapes agree"))
}

fn check_counts(agents: usize, dim: usize) -> Result<(), ScenarioError> {
    if agents == 0 {
        return Err(ScenarioError::Invalid { field: "agents", value: 0.0 });
    }
    if dim == 0 {
        return Err(ScenarioError::Invalid { field: "dim", value: 0.0 });
    }
    Ok(())
}

/// Half-opening of the `ε`-cone, `arccos ε`; two velocities in it are at
/// most `2 arccos ε = arccos(2ε² − 1)` apart.
pub fn cone_half_angle(epsilon: f64) -> f64 {
    epsilon.clamp(-1.0, 1.0).acos().min(PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioError {
    Invalid { field: &'static str, value: f64 },
    Precondition { inequality: &'static str, lhs: f64, rhs: f64 },
    InsideCore { x1: f64, r0: f64 },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Invalid { field, value } => write!(f, "invalid {field} = {value}"),
            ScenarioError::Precondition { inequality, lhs, rhs } => {
                write!(f, "precondition {inequality} violated ({lhs} vs {rhs})")
            }
            ScenarioError::InsideCore { x1, r0 } => {
                write!(f, "x1 = {x1} is inside the kernel core r0 = {r0}")
            }
        }
    }
}

impl core::error::Error for ScenarioError {}
