//! Agents, system parameters and communication kernels.

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

/// Radial communication weight `φ(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `φ ≡ level`.
    Uniform { level: f64 },
    /// `φ(r) = λ / (1 + r²)^{β/2}`.
    SmoothPower { lambda: f64, beta: f64 },
    /// `φ(r) = r^{-β}` for `r > r0`, capped at `r0^{-β}` below.
    TruncatedExactPower { beta: f64, r0: f64 },
}

impl Kernel {
    /// Evaluates `φ(r)`. Negative distances are rejected.
    pub fn eval(&self, r: f64) -> Result<f64, ModelError> {
        if !(r >= 0.0) {
            return Err(ModelError::NegativeDistance(r));
        }
        Ok(self.eval_unchecked(r))
    }

    /// Same as [`Kernel::eval`] without the sign check; callers pass norms.
    #[inline]
    pub fn eval_unchecked(&self, r: f64) -> f64 {
        match *self {
            Kernel::Uniform { level } => level,
            Kernel::SmoothPower { lambda, beta } => {
                lambda / (1.0 + r * r).powf(0.5 * beta)
            }
            Kernel::TruncatedExactPower { beta, r0 } => r.max(r0).powf(-beta),
        }
    }

    /// `φ_* = inf_{r ≥ 0} φ(r)`.
    pub fn infimum(&self) -> f64 {
        match *self {
            Kernel::Uniform { level } => level,
            Kernel::SmoothPower { lambda, beta } if beta == 0.0 => lambda,
            _ => 0.0,
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Kernel::Uniform { .. })
    }

    /// Whether `φ(r) ≥ λ/(1+r²)^{β/2}` holds with some `λ > 0` and `β ≤ 1`.
    pub fn has_fat_tail(&self) -> bool {
        match *self {
            Kernel::Uniform { level } => level > 0.0,
            Kernel::SmoothPower { lambda, beta } => lambda > 0.0 && beta <= 1.0,
            Kernel::TruncatedExactPower { beta, .. } => beta <= 1.0,
        }
    }

    fn check(&self) -> Result<(), Violation> {
        let bad = |field, value| Err(Violation { agent: None, field, value });
        match *self {
            Kernel::Uniform { level } if !(level >= 0.0 && level.is_finite()) => {
                bad("kernel.level", level)
            }
            Kernel::SmoothPower { lambda, .. } if !(lambda > 0.0 && lambda.is_finite()) => {
                bad("kernel.lambda", lambda)
            }
            Kernel::SmoothPower { beta, .. } if !(beta >= 0.0 && beta.is_finite()) => {
                bad("kernel.beta", beta)
            }
            Kernel::TruncatedExactPower { beta, .. } if !(beta > 0.0 && beta.is_finite()) => {
                bad("kernel.beta", beta)
            }
            Kernel::TruncatedExactPower { r0, .. } if !(r0 > 0.0 && r0.is_finite()) => {
                bad("kernel.r0", r0)
            }
            _ => Ok(()),
        }
    }
}

/// Friction strength `σ`, parameter coupling `κ`, friction exponent `p`
/// and the communication kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub sigma: f64,
    pub kappa: f64,
    pub p: f64,
    pub kernel: Kernel,
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), Violation> {
        let bad = |field, value| Err(Violation { agent: None, field, value });
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma", self.sigma);
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad("kappa", self.kappa);
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return bad("p", self.p);
        }
        self.kernel.check()
    }
}

/// Positions, velocities, characteristic parameters `θ_i` and masses of
/// `N` agents in `ℝⁿ`. Vectors are stored agent-major: agent `i` occupies
/// `[i*n, (i+1)*n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlockState {
    dim: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub theta: Vec<f64>,
    pub mass: Vec<f64>,
}

impl FlockState {
    /// Checks only that the buffers agree in shape; values are checked by
    /// [`validate`].
    pub fn new(
        dim: usize,
        positions: Vec<f64>,
        velocities: Vec<f64>,
        theta: Vec<f64>,
        mass: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let agents = theta.len();
        if dim == 0 {
            return Err(ModelError::Shape("dimension must be at least 1"));
        }
        if agents == 0 {
            return Err(ModelError::Shape("at least one agent is required"));
        }
        if mass.len() != agents {
            return Err(ModelError::Shape("mass and theta lengths differ"));
        }
        if positions.len() != agents * dim || velocities.len() != agents * dim {
            return Err(ModelError::Shape("positions/velocities must hold N*n entries"));
        }
        Ok(FlockState { dim, positions, velocities, theta, mass })
    }

    /// Builds a state from per-agent rows.
    pub fn from_rows(
        positions: &[Vec<f64>],
        velocities: &[Vec<f64>],
        theta: Vec<f64>,
        mass: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let dim = positions.first().map_or(0, Vec::len);
        if positions.iter().chain(velocities).any(|row| row.len() != dim) {
            return Err(ModelError::Shape("rows must share one dimension"));
        }
        Self::new(dim, positions.concat(), velocities.concat(), theta, mass)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn agents(&self) -> usize {
        self.theta.len()
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn speed(&self, i: usize) -> f64 {
        norm(self.velocity(i))
    }

    /// `M = Σ m_i`.
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `Σ m_i θ_i`, the conserved parameter momentum.
    pub fn theta_momentum(&self) -> f64 {
        self.mass.iter().zip(&self.theta).map(|(m, t)| m * t).sum()
    }

    /// Mass-weighted mean `θ̄ = Σ m_i θ_i / M`, the common limit of the
    /// parameters when `κ > 0`.
    pub fn mean_theta(&self) -> f64 {
        self.theta_momentum() / self.total_mass()
    }
}

/// Euclidean norm.
#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `min_i v_iⁿ / |v_i|`. The state is sectorial with margin `ε` iff the
/// result is at least `ε > 0`.
pub fn sector_margin(state: &FlockState) -> Result<f64, ModelError> {
    let n = state.dim();
    let mut margin = f64::INFINITY;
    for i in 0..state.agents() {
        let v = state.velocity(i);
        let speed = norm(v);
        if speed == 0.0 {
            return Err(ModelError::ZeroSpeed { agent: i });
        }
        margin = margin.min(v[n - 1] / speed);
    }
    Ok(margin)
}

/// First invariant violated by `(state, params)`, if any.
pub fn validate(state: &FlockState, params: &SystemParams) -> Result<(), Violation> {
    params.validate()?;
    let n = state.dim();
    for i in 0..state.agents() {
        let bad = |field, value| Err(Violation { agent: Some(i), field, value });
        if !(state.theta[i] > 0.0 && state.theta[i].is_finite()) {
            return bad("theta", state.theta[i]);
        }
        if !(state.mass[i] > 0.0 && state.mass[i].is_finite()) {
            return bad("mass", state.mass[i]);
        }
        if let Some(&x) = state.position(i).iter().find(|x| !x.is_finite()) {
            return bad("position", x);
        }
        if let Some(&v) = state.velocity(i).iter().find(|v| !v.is_finite()) {
            return bad("velocity", v);
        }
        debug_assert_eq!(state.velocity(i).len(), n);
    }
    Ok(())
}

/// A violated invariant. `agent` is the zero-based agent index for
/// per-agent fields and `None` for parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub agent: Option<usize>,
    pub field: &'static str,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.agent {
            Some(i) => write!(f, "agent {i}: invalid {} = {}", self.field, self.value),
            None => write!(f, "invalid {} = {}", self.field, self.value),
        }
    }
}

impl core::error::Error for Violation {}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    NegativeDistance(f64),
    ZeroSpeed { agent: usize },
    Shape(&'static str),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::NegativeDistance(r) => write!(f, "kernel evaluated at negative distance {r}"),
            ModelError::ZeroSpeed { agent } => write!(f, "agent {agent} has zero velocity"),
            ModelError::Shape(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for ModelError {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn three_agents() -> FlockState {
        FlockState::from_rows(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]],
            &[vec![0.1, 1.0], vec![0.0, 1.0], vec![-0.2, 0.8]],
            vec![1.0, 2.0, 0.5],
            vec![0.3, 0.3, 0.4],
        )
        .unwrap()
    }

    fn params() -> SystemParams {
        SystemParams { sigma: 1.0, kappa: 0.1, p: 2.0, kernel: Kernel::Uniform { level: 1.0 } }
    }

    #[test]
    fn kernel_values() {
        let k = Kernel::SmoothPower { lambda: 2.0, beta: 1.0 };
        assert_eq!(k.eval(0.0).unwrap(), 2.0);
        let k = Kernel::SmoothPower { lambda: 1.0, beta: 2.0 };
        assert_abs_diff_eq!(k.eval(1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(Kernel::Uniform { level: 1.0 }.eval(7.3).unwrap(), 1.0);
        let t = Kernel::TruncatedExactPower { beta: 2.0, r0: 0.5 };
        assert_eq!(t.eval(0.1).unwrap(), 4.0);
        assert_abs_diff_eq!(t.eval(2.0).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn kernel_rejects_negative_distance() {
        let k = Kernel::Uniform { level: 1.0 };
        assert_eq!(k.eval(-1e-9), Err(ModelError::NegativeDistance(-1e-9)));
    }

    #[test]
    fn sector_margin_examples() {
        let s = 1.0 / 2f64.sqrt();
        let st = FlockState::from_rows(
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
            &[vec![0.0, 1.0], vec![s, s]],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        assert_abs_diff_eq!(sector_margin(&st).unwrap(), s, epsilon = 1e-15);

        let st = FlockState::new(3, vec![0.0; 6], vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], vec![1.0; 2], vec![1.0; 2])
            .unwrap();
        assert_eq!(sector_margin(&st).unwrap(), 1.0);

        let st = FlockState::new(2, vec![0.0; 2], vec![1.0, 0.0], vec![1.0], vec![1.0]).unwrap();
        assert_eq!(sector_margin(&st).unwrap(), 0.0);

        let st = FlockState::new(2, vec![0.0; 4], vec![1.0, 1.0, 0.0, 0.0], vec![1.0; 2], vec![1.0; 2])
            .unwrap();
        assert_eq!(sector_margin(&st), Err(ModelError::ZeroSpeed { agent: 1 }));
    }

    #[test]
    fn validate_reports_agent() {
        assert_eq!(validate(&three_agents(), &params()), Ok(()));

        let mut st = three_agents();
        st.theta[1] = 0.0;
        let v = validate(&st, &params()).unwrap_err();
        assert_eq!((v.agent, v.field), (Some(1), "theta"));

        let mut st = three_agents();
        st.mass[0] = -1.0;
        let v = validate(&st, &params()).unwrap_err();
        assert_eq!((v.agent, v.field), (Some(0), "mass"));

        let mut p = params();
        p.sigma = 0.0;
        assert_eq!(validate(&three_agents(), &p).unwrap_err().field, "sigma");
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(FlockState::new(2, vec![0.0; 3], vec![0.0; 4], vec![1.0; 2], vec![1.0; 2]).is_err());
        assert!(FlockState::new(0, vec![], vec![], vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn derived_means() {
        let st = three_agents();
        assert_abs_diff_eq!(st.total_mass(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.theta_momentum(), 0.3 + 0.6 + 0.2, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn kernels_are_nonincreasing(
            lambda in 0.1f64..5.0, beta in 0.0f64..3.0, r0 in 0.01f64..2.0,
            r1 in 0.0f64..50.0, dr in 0.0f64..50.0,
        ) {
            let r2 = r1 + dr;
            for k in [
                Kernel::Uniform { level: lambda },
                Kernel::SmoothPower { lambda, beta },
                Kernel::TruncatedExactPower { beta: beta + 0.01, r0 },
            ] {
                let (a, b) = (k.eval(r1).unwrap(), k.eval(r2).unwrap());
                prop_assert!(a >= b && b >= 0.0, "{k:?}: φ({r1})={a} < φ({r2})={b}");
            }
        }

        #[test]
        fn smooth_power_identity(lambda in 0.1f64..5.0, beta in 0.0f64..=1.0, r in 0.0f64..100.0) {
            let k = Kernel::SmoothPower { lambda, beta };
            let scaled = k.eval(r).unwrap() * (1.0 + r * r).powf(0.5 * beta);
            prop_assert!((scaled - lambda).abs() <= 1e-12 * lambda);
            prop_assert!(k.has_fat_tail());
        }

        #[test]
        fn margin_invariant_under_rotation_about_axis(
            vs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.1f64..1.0), 1..6),
            angle in 0.0f64..6.3,
        ) {
            let n = vs.len();
            let flat: Vec<f64> = vs.iter().flat_map(|&(a, b, c)| [a, b, c]).collect();
            let (s, c) = angle.sin_cos();
            let rotated: Vec<f64> = vs
                .iter()
                .flat_map(|&(a, b, h)| [c * a - s * b, s * a + c * b, h])
                .collect();
            let st = FlockState::new(3, vec![0.0; 3 * n], flat, vec![1.0; n], vec![1.0; n]).unwrap();
            let rt = FlockState::new(3, vec![0.0; 3 * n], rotated, vec![1.0; n], vec![1.0; n]).unwrap();
            let (a, b) = (sector_margin(&st).unwrap(), sector_margin(&rt).unwrap());
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
