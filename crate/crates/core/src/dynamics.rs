//! Vector fields of the flock, the velocity-only system and the opinion
//! system, and the fixed-step integrator that records diagnostics.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::diagnostics::{self, DiagnosticsFrame};
use crate::model::{self, FlockState, SystemParams, Violation};
use crate::nash::{NashError, OpinionGame};
use crate::rk4::{Rk4, VectorField};

/// Time derivative of a [`FlockState`], laid out like the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dx: Vec<f64>,
    pub dv: Vec<f64>,
    pub dtheta: Vec<f64>,
}

/// `ẋ_i = v_i`,
/// `v̇_i = Σ_j m_j φ(|x_i − x_j|)(v_j − v_i) + σ(θ_i − |v_i|^p) v_i`,
/// `θ̇_i = κ Σ_j m_j φ(|x_i − x_j|)(θ_j − θ_i)`.
pub fn rhs_full(state: &FlockState, params: &SystemParams) -> Result<Derivative, DynamicsError> {
    let len = state.positions.len();
    let mut d = Derivative { dx: vec![0.0; len], dv: vec![0.0; len], dtheta: vec![0.0; state.agents()] };
    let view = StateView {
        dim: state.dim(),
        x: &state.positions,
        v: &state.velocities,
        theta: &state.theta,
        mass: &state.mass,
    };
    flock_field(&view, params, &mut d.dx, &mut d.dv, &mut d.dtheta)?;
    Ok(d)
}

/// Position-free velocity field for the uniform kernel `φ ≡ 1` with frozen
/// parameters: `v̇_i = Σ_j m_j (v_j − v_i) + σ(θ_i − |v_i|^p) v_i`.
/// Returns `dx = v` and `dθ = 0` alongside.
pub fn rhs_velocity_only(state: &FlockState, params: &SystemParams) -> Result<Derivative, DynamicsError> {
    if !params.kernel.is_uniform() {
        return Err(DynamicsError::KernelNotUniform);
    }
    if params.kappa != 0.0 {
        return Err(DynamicsError::CouplingNotFrozen(params.kappa));
    }
    let unit = SystemParams { kernel: model::Kernel::Uniform { level: 1.0 }, ..*params };
    let n = state.dim();
    let agents = state.agents();
    let mut dv = vec![0.0; n * agents];
    let momentum: Vec<f64> = (0..n)
        .map(|k| (0..agents).map(|j| state.mass[j] * state.velocities[j * n + k]).sum())
        .collect();
    let total = state.total_mass();
    for i in 0..agents {
        let v = state.velocity(i);
        let force = unit.sigma * (state.theta[i] - model::norm(v).powf(unit.p));
        for k in 0..n {
            dv[i * n + k] = momentum[k] - total * v[k] + force * v[k];
        }
        if dv[i * n..(i + 1) * n].iter().any(|x| !x.is_finite()) {
            return Err(DynamicsError::NonFinite { agent: i });
        }
    }
    Ok(Derivative { dx: state.velocities.clone(), dv, dtheta: vec![0.0; agents] })
}

/// Opinion field `ẏ_i = Σ_k m_k (y_k − y_i) + σ(θ_i − y_i^p) y_i`.
pub fn rhs_opinion(y: &[f64], game: &OpinionGame) -> Result<Vec<f64>, DynamicsError> {
    let mut out = vec![0.0; y.len()];
    opinion_field(y, game, &mut out)?;
    Ok(out)
}

/// `d|v_i|/dt` under [`rhs_velocity_only`] minus the opinion field at
/// `y = |v|`, i.e. `Σ_j m_j (v̂_i·v_j − |v_j|)`. Vanishes once the
/// velocities are aligned; nonzero speeds required.
pub fn opinion_defect(state: &FlockState, params: &SystemParams) -> Result<Vec<f64>, DynamicsError> {
    let d = rhs_velocity_only(state, params)?;
    let speeds: Vec<f64> = (0..state.agents()).map(|i| state.speed(i)).collect();
    let game = OpinionGame::new(state.theta.clone(), state.mass.clone(), params.sigma, params.p)?;
    let field = rhs_opinion(&speeds, &game)?;
    let n = state.dim();
    Ok((0..state.agents())
        .map(|i| {
            let growth = model::dot(state.velocity(i), &d.dv[i * n..(i + 1) * n]) / speeds[i];
            growth - field[i]
        })
        .collect())
}

fn opinion_field(y: &[f64], game: &OpinionGame, out: &mut [f64]) -> Result<(), DynamicsError> {
    if y.len() != game.players() {
        return Err(NashError::Shape { expected: game.players(), found: y.len() }.into());
    }
    if let Some(index) = y.iter().position(|v| !(*v > 0.0)) {
        return Err(NashError::NonPositive { index, value: y[index] }.into());
    }
    let total = game.total_mass();
    let momentum: f64 = game.mass().iter().zip(y).map(|(m, v)| m * v).sum();
    let (sigma, p) = (game.sigma(), game.p());
    for (i, o) in out.iter_mut().enumerate() {
        *o = momentum - total * y[i] + sigma * (game.theta()[i] - y[i].powf(p)) * y[i];
    }
    Ok(())
}

struct StateView<'a> {
    dim: usize,
    x: &'a [f64],
    v: &'a [f64],
    theta: &'a [f64],
    mass: &'a [f64],
}

fn flock_field(
    s: &StateView<'_>,
    params: &SystemParams,
    dx: &mut [f64],
    dv: &mut [f64],
    dtheta: &mut [f64],
) -> Result<(), DynamicsError> {
    let n = s.dim;
    let agents = s.mass.len();
    dx.copy_from_slice(s.v);
    dv.fill(0.0);
    dtheta.fill(0.0);
    for i in 0..agents {
        let xi = &s.x[i * n..(i + 1) * n];
        let vi = &s.v[i * n..(i + 1) * n];
        for j in 0..agents {
            if j == i {
                continue;
            }
            let xj = &s.x[j * n..(j + 1) * n];
            let vj = &s.v[j * n..(j + 1) * n];
            let w = s.mass[j] * params.kernel.eval_unchecked(model::distance(xi, xj));
            for k in 0..n {
                dv[i * n + k] += w * (vj[k] - vi[k]);
            }
            dtheta[i] += params.kappa * w * (s.theta[j] - s.theta[i]);
        }
        let force = params.sigma * (s.theta[i] - model::norm(vi).powf(params.p));
        for k in 0..n {
            dv[i * n + k] += force * vi[k];
        }
        if !dtheta[i].is_finite() || dv[i * n..(i + 1) * n].iter().any(|x| !x.is_finite()) {
            return Err(DynamicsError::NonFinite { agent: i });
        }
    }
    Ok(())
}

/// The flock packed as `[x, v, θ]` for the stepper.
struct FlockField<'a> {
    dim: usize,
    mass: &'a [f64],
    params: &'a SystemParams,
}

impl VectorField for FlockField<'_> {
    type Error = DynamicsError;

    fn len(&self) -> usize {
        self.mass.len() * (2 * self.dim + 1)
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<(), DynamicsError> {
        let block = self.mass.len() * self.dim;
        let (x, rest) = y.split_at(block);
        let (v, theta) = rest.split_at(block);
        let (dx, drest) = dy.split_at_mut(block);
        let (dv, dtheta) = drest.split_at_mut(block);
        let view = StateView { dim: self.dim, x, v, theta, mass: self.mass };
        flock_field(&view, self.params, dx, dv, dtheta)
    }
}

struct OpinionField<'a>(&'a OpinionGame);

impl VectorField for OpinionField<'_> {
    type Error = DynamicsError;

    fn len(&self) -> usize {
        self.0.players()
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<(), DynamicsError> {
        opinion_field(y, self.0, dy)
    }
}

/// Step size, horizon and recording stride of a fixed-step RK4 run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub t_final: f64,
    pub record_every: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec { dt: 1e-3, t_final: 10.0, record_every: 10 }
    }
}

impl IntegratorSpec {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DynamicsError::BadSpec("dt must be positive"));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(DynamicsError::BadSpec("t_final must be at least dt"));
        }
        if self.record_every == 0 {
            return Err(DynamicsError::BadSpec("record_every must be positive"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Which diagnostics to compute on recorded states.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Probes {
    pub frames: bool,
    /// Grid size for the projected angle; `None` skips it.
    pub gamma2d_grid: Option<usize>,
}

impl Probes {
    pub fn none() -> Self {
        Probes::default()
    }

    pub fn all(grid: usize) -> Self {
        Probes { frames: true, gamma2d_grid: Some(grid) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: FlockState,
    pub frame: Option<DiagnosticsFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Set when some speed exceeded `10 ×` [`Trajectory::speed_bound`].
    pub terminated_early: bool,
    /// A-priori bound `C = max(max_i |v_i(0)|^p, max_i θ_i(0))^{1/p}`.
    pub speed_bound: f64,
    pub steps_taken: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory records the initial state")
    }

    pub fn frames(&self) -> impl Iterator<Item = (f64, &DiagnosticsFrame)> {
        self.samples.iter().filter_map(|s| s.frame.as_ref().map(|f| (s.t, f)))
    }
}

/// Multiple of the a-priori speed bound that stops a run.
pub const BLOWUP_FACTOR: f64 = 10.0;

/// A-priori speed bound from the logistic inequality for `|v_+|^p`.
pub fn speed_bound(state: &FlockState, params: &SystemParams) -> f64 {
    let vmax = (0..state.agents()).map(|i| state.speed(i)).fold(0.0, f64::max);
    let tmax = state.theta.iter().copied().fold(0.0, f64::max);
    vmax.powf(params.p).max(tmax).powf(1.0 / params.p)
}

/// Integrates the flock with classical RK4. The initial state is always
/// recorded, then every `record_every` steps and the final step.
pub fn integrate(
    state: &FlockState,
    params: &SystemParams,
    spec: &IntegratorSpec,
    probes: &Probes,
) -> Result<Trajectory, DynamicsError> {
    model::validate(state, params)?;
    spec.validate()?;
    let dim = state.dim();
    let agents = state.agents();
    let field = FlockField { dim, mass: &state.mass, params };
    let mut y = Vec::with_capacity(field.len());
    y.extend_from_slice(&state.positions);
    y.extend_from_slice(&state.velocities);
    y.extend_from_slice(&state.theta);

    let bound = speed_bound(state, params);
    let limit = BLOWUP_FACTOR * bound;
    let steps = spec.steps();
    let mut stepper = Rk4::new(y.len());
    let mut samples = vec![sample(0.0, state.clone(), probes)];
    let block = agents * dim;
    let mut terminated_early = false;
    let mut taken = 0;

    for step in 1..=steps {
        let t = step as f64 * spec.dt;
        stepper.step(&field, &mut y, spec.dt).map_err(|e| match e {
            DynamicsError::NonFinite { agent } => DynamicsError::NonFiniteAt { t, agent: Some(agent) },
            other => other,
        })?;
        if y.iter().any(|x| !x.is_finite()) {
            return Err(DynamicsError::NonFiniteAt { t, agent: None });
        }
        taken = step;
        let too_fast = (0..agents).any(|i| model::norm(&y[block + i * dim..block + (i + 1) * dim]) > limit);
        if step % spec.record_every == 0 || step == steps || too_fast {
            let current = unpack(&y, state);
            samples.push(sample(t, current, probes));
        }
        if too_fast {
            terminated_early = true;
            break;
        }
    }
    Ok(Trajectory { samples, terminated_early, speed_bound: bound, steps_taken: taken })
}

fn unpack(y: &[f64], like: &FlockState) -> FlockState {
    let block = like.positions.len();
    FlockState::new(
        like.dim(),
        y[..block].to_vec(),
        y[block..2 * block].to_vec(),
        y[2 * block..].to_vec(),
        like.mass.clone(),
    )
    .expect("shape preserved")
}

fn sample(t: f64, state: FlockState, probes: &Probes) -> Sample {
    let frame = probes.frames.then(|| diagnostics::frame(&state, probes.gamma2d_grid));
    Sample { t, state, frame }
}

/// Integrates the opinion system from `y0`, recording `(t, y)` every
/// `record_every` steps. Stops early, after recording, as soon as
/// `stop(t, y)` returns true.
pub fn integrate_opinion(
    y0: &[f64],
    game: &OpinionGame,
    spec: &IntegratorSpec,
    mut stop: impl FnMut(f64, &[f64]) -> bool,
) -> Result<Vec<(f64, Vec<f64>)>, DynamicsError> {
    spec.validate()?;
    let field = OpinionField(game);
    let mut y = y0.to_vec();
    opinion_field(&y, game, &mut vec![0.0; y.len()])?;
    let mut stepper = Rk4::new(y.len());
    let mut out = vec![(0.0, y.clone())];
    if stop(0.0, &y) {
        return Ok(out);
    }
    let steps = spec.steps();
    for step in 1..=steps {
        let t = step as f64 * spec.dt;
        stepper.step(&field, &mut y, spec.dt).map_err(|e| match e {
            DynamicsError::Opinion(_) => DynamicsError::NonFiniteAt { t, agent: None },
            other => other,
        })?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFiniteAt { t, agent: None });
        }
        let halt = stop(t, &y);
        if step % spec.record_every == 0 || step == steps || halt {
            out.push((t, y.clone()));
        }
        if halt {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsError {
    Invalid(Violation),
    BadSpec(&'static str),
    NonFinite { agent: usize },
    NonFiniteAt { t: f64, agent: Option<usize> },
    KernelNotUniform,
    CouplingNotFrozen(f64),
    Opinion(NashError),
}

impl From<Violation> for DynamicsError {
    fn from(v: Violation) -> Self {
        DynamicsError::Invalid(v)
    }
}

impl From<NashError> for DynamicsError {
    fn from(e: NashError) -> Self {
        DynamicsError::Opinion(e)
    }
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsError::Invalid(v) => write!(f, "invalid input: {v}"),
            DynamicsError::BadSpec(msg) => write!(f, "bad integrator spec: {msg}"),
            DynamicsError::NonFinite { agent } => write!(f, "non-finite derivative for agent {agent}"),
            DynamicsError::NonFiniteAt { t, agent: Some(a) } => write!(f, "non-finite state at t = {t} (agent {a})"),
            DynamicsError::NonFiniteAt { t, agent: None } => write!(f, "non-finite state at t = {t}"),
            DynamicsError::KernelNotUniform => f.write_str("velocity-only system requires a uniform kernel"),
            DynamicsError::CouplingNotFrozen(k) => write!(f, "velocity-only system requires kappa = 0, got {k}"),
            DynamicsError::Opinion(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DynamicsError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Kernel;
    use approx::assert_relative_eq;

    fn ha_state(v0: f64) -> FlockState {
        FlockState::new(1, vec![0.0, 0.0], vec![v0, -v0], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    fn ha_params(lambda: f64, sigma: f64) -> SystemParams {
        SystemParams { sigma, kappa: 0.0, p: 2.0, kernel: Kernel::Uniform { level: lambda } }
    }

    #[test]
    fn ha_reduction_force_balance() {
        let d = rhs_full(&ha_state(1.0), &ha_params(1.0, 1.0)).unwrap();
        assert_eq!(d.dv, vec![-1.0, 1.0]);
        assert_eq!(d.dx, vec![1.0, -1.0]);
        let dv = rhs_velocity_only(&ha_state(1.0), &ha_params(1.0, 1.0)).unwrap().dv;
        assert_eq!(dv, vec![-1.0, 1.0]);
    }

    #[test]
    fn aligned_equilibrium_is_fixed() {
        // |v|^p = θ with p = 2: v = (0.6, 0.8) has |v| = 1.
        let st = FlockState::new(2, vec![0.0, 0.0, 3.0, 1.0, -2.0, 0.5], [0.6, 0.8].repeat(3), vec![1.0; 3], vec![
            0.2, 0.5, 0.3,
        ])
        .unwrap();
        let params = SystemParams { sigma: 2.0, kappa: 0.3, p: 2.0, kernel: Kernel::SmoothPower { lambda: 1.0, beta: 0.5 } };
        let d = rhs_full(&st, &params).unwrap();
        assert!(d.dv.iter().all(|x| x.abs() < 1e-15), "{:?}", d.dv);
        assert!(d.dtheta.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn single_agent_is_pure_friction() {
        let st = FlockState::new(2, vec![1.0, 2.0], vec![0.3, -0.4], vec![2.0], vec![1.5]).unwrap();
        let params = SystemParams { sigma: 1.5, kappa: 0.2, p: 3.0, kernel: Kernel::Uniform { level: 1.0 } };
        let d = rhs_full(&st, &params).unwrap();
        let force = 1.5 * (2.0 - 0.5f64.powf(3.0));
        assert_eq!(d.dv, vec![force * 0.3, force * -0.4]);
        assert_eq!(d.dtheta, vec![0.0]);
    }

    #[test]
    fn theta_momentum_derivative_vanishes() {
        let st = FlockState::new(
            2,
            vec![0.0, 0.0, 1.0, 0.5, -0.7, 2.0],
            vec![0.1, 1.0, 0.5, 0.5, -0.3, 0.9],
            vec![0.4, 1.9, 1.1],
            vec![0.2, 1.3, 0.6],
        )
        .unwrap();
        let params = SystemParams { sigma: 1.0, kappa: 0.7, p: 1.5, kernel: Kernel::SmoothPower { lambda: 2.0, beta: 1.0 } };
        let d = rhs_full(&st, &params).unwrap();
        let s: f64 = d.dtheta.iter().zip(&st.mass).map(|(a, m)| a * m).sum();
        assert!(s.abs() < 1e-15);
    }

    #[test]
    fn velocity_only_checks_preconditions() {
        let st = ha_state(0.5);
        let mut p = ha_params(1.0, 1.0);
        p.kernel = Kernel::SmoothPower { lambda: 1.0, beta: 1.0 };
        assert_eq!(rhs_velocity_only(&st, &p), Err(DynamicsError::KernelNotUniform));
        let mut p = ha_params(1.0, 1.0);
        p.kappa = 0.1;
        assert!(matches!(rhs_velocity_only(&st, &p), Err(DynamicsError::CouplingNotFrozen(_))));
    }

    #[test]
    fn velocity_only_matches_opinion_in_one_dimension() {
        let theta = vec![0.5, 1.0, 2.0];
        let mass = vec![0.3, 0.3, 0.4];
        let y = vec![0.9, 1.3, 0.7];
        let st = FlockState::new(1, vec![0.0; 3], y.clone(), theta.clone(), mass.clone()).unwrap();
        let params = SystemParams { sigma: 1.2, kappa: 0.0, p: 2.0, kernel: Kernel::Uniform { level: 1.0 } };
        let dv = rhs_velocity_only(&st, &params).unwrap().dv;
        let game = OpinionGame::new(theta, mass, 1.2, 2.0).unwrap();
        let dy = rhs_opinion(&y, &game).unwrap();
        for (a, b) in dv.iter().zip(&dy) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
        let full = rhs_full(&st, &params).unwrap().dv;
        for (a, b) in dv.iter().zip(&full) {
            assert_relative_eq!(a, b, max_relative = 1e-13);
        }
    }

    #[test]
    fn opinion_defect_matches_projection_formula() {
        let st = FlockState::new(
            2,
            vec![0.0; 6],
            vec![1.0, 0.0, 0.0, 2.0, -0.6, 0.8],
            vec![1.0, 0.5, 2.0],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let params = SystemParams { sigma: 0.7, kappa: 0.0, p: 2.0, kernel: Kernel::Uniform { level: 1.0 } };
        let got = opinion_defect(&st, &params).unwrap();
        for (i, g) in got.iter().enumerate() {
            let vi = st.velocity(i);
            let unit: Vec<f64> = vi.iter().map(|x| x / st.speed(i)).collect();
            let expect: f64 = (0..3).map(|j| st.mass[j] * (model::dot(&unit, st.velocity(j)) - st.speed(j))).sum();
            assert_relative_eq!(*g, expect, epsilon = 1e-14);
        }
        // aligned velocities: no defect
        let aligned = FlockState::new(2, vec![0.0; 4], vec![0.6, 0.8, 1.2, 1.6], vec![1.0; 2], vec![0.5; 2]).unwrap();
        for g in opinion_defect(&aligned, &params).unwrap() {
            assert!(g.abs() < 1e-14);
        }
    }

    #[test]
    fn opinion_field_examples() {
        let g = OpinionGame::new(vec![1.5; 3], vec![1.0; 3], 1.0, 2.0).unwrap();
        let y = g.conviction_opinions();
        assert!(rhs_opinion(&y, &g).unwrap().iter().all(|x| x.abs() < 1e-15));

        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let g = OpinionGame::new(vec![1.0, 3.0], vec![1.0, 1.0], 1.0, 1.0).unwrap();
        assert!(rhs_opinion(&[phi, phi * phi], &g).unwrap().iter().all(|x| x.abs() < 1e-14));

        let g = OpinionGame::new(vec![4.0], vec![1.0], 2.0, 2.0).unwrap();
        assert_eq!(rhs_opinion(&[1.0], &g).unwrap(), vec![6.0]);

        assert!(rhs_opinion(&[-1.0], &g).is_err());
    }

    #[test]
    fn zero_velocity_state_stays_fixed() {
        let st = FlockState::new(2, vec![0.0, 0.0, 1.0, 1.0], vec![0.0; 4], vec![1.0; 2], vec![0.5; 2]).unwrap();
        let params = SystemParams { sigma: 1.0, kappa: 0.0, p: 2.0, kernel: Kernel::Uniform { level: 1.0 } };
        let spec = IntegratorSpec { dt: 1e-2, t_final: 5.0, record_every: 50 };
        let traj = integrate(&st, &params, &spec, &Probes::none()).unwrap();
        assert_eq!(traj.last().state, st);
    }

    fn ha_closed(lambda_eq_sigma: f64, v0: f64, t: f64) -> f64 {
        v0 / (2.0 * lambda_eq_sigma * t * v0 * v0 + 1.0).sqrt()
    }

    fn ha_error(dt: f64) -> f64 {
        let spec = IntegratorSpec { dt, t_final: 4.0, record_every: usize::MAX };
        let traj = integrate(&ha_state(1.0), &ha_params(1.0, 1.0), &spec, &Probes::none()).unwrap();
        (traj.last().state.velocities[0] - ha_closed(1.0, 1.0, 4.0)).abs()
    }

    #[test]
    fn ha_boundary_case_matches_closed_form() {
        let spec = IntegratorSpec { dt: 1e-4, t_final: 4.0, record_every: 1000 };
        let traj = integrate(&ha_state(1.0), &ha_params(1.0, 1.0), &spec, &Probes::none()).unwrap();
        let last = traj.last();
        assert_relative_eq!(last.t, 4.0, max_relative = 1e-15);
        assert!((last.state.velocities[0] - 1.0 / 3.0).abs() < 1e-6);
        assert_eq!(last.state.velocities[0], -last.state.velocities[1]);
    }

    #[test]
    fn rk4_order_against_closed_form() {
        let ratio = ha_error(0.02) / ha_error(0.01);
        assert!((ratio - 16.0).abs() < 3.0, "ratio {ratio}");
    }

    #[test]
    fn recording_stride() {
        let spec = IntegratorSpec { dt: 0.1, t_final: 1.05, record_every: 3 };
        let traj = integrate(&ha_state(0.5), &ha_params(1.0, 1.0), &spec, &Probes::none()).unwrap();
        let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 5);
        assert_relative_eq!(times[4], 1.1, max_relative = 1e-14);
    }

    #[test]
    fn speed_bound_takes_larger_source() {
        let params = ha_params(1.0, 1.0);
        assert_relative_eq!(speed_bound(&ha_state(0.5), &params), 1.0, max_relative = 1e-15);
        assert_relative_eq!(speed_bound(&ha_state(3.0), &params), 3.0, max_relative = 1e-15);
    }

    #[test]
    fn speeds_stay_under_bound() {
        let st = FlockState::new(2, vec![0.0, 0.0, 1.0, 0.0], vec![2.0, 0.0, -0.5, 0.3], vec![0.5, 1.5], vec![0.5; 2]).unwrap();
        let params = SystemParams { sigma: 3.0, kappa: 0.5, p: 2.0, kernel: Kernel::SmoothPower { lambda: 1.0, beta: 1.0 } };
        let spec = IntegratorSpec { dt: 1e-3, t_final: 5.0, record_every: 100 };
        let traj = integrate(&st, &params, &spec, &Probes::none()).unwrap();
        assert!(!traj.terminated_early);
        for s in &traj.samples {
            for i in 0..2 {
                assert!(s.state.speed(i) <= traj.speed_bound + 1e-9);
            }
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        let mut st = ha_state(0.5);
        st.theta[1] = -1.0;
        let spec = IntegratorSpec::default();
        assert!(matches!(
            integrate(&st, &ha_params(1.0, 1.0), &spec, &Probes::none()),
            Err(DynamicsError::Invalid(Violation { agent: Some(1), .. }))
        ));
        let bad = IntegratorSpec { dt: -1.0, ..spec };
        assert!(matches!(
            integrate(&ha_state(0.5), &ha_params(1.0, 1.0), &bad, &Probes::none()),
            Err(DynamicsError::BadSpec(_))
        ));
    }

    #[test]
    fn opinion_integration_stops_on_request() {
        let g = OpinionGame::new(vec![1.0, 2.0], vec![1.0, 1.0], 1.0, 1.0).unwrap();
        let spec = IntegratorSpec { dt: 0.01, t_final: 100.0, record_every: 100 };
        let run = integrate_opinion(&[0.5, 0.5], &g, &spec, |t, _| t >= 1.0).unwrap();
        assert_relative_eq!(run.last().unwrap().0, 1.0, max_relative = 1e-12);
    }
}
