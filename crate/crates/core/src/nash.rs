//! The opinion game with frozen convictions and its Nash equilibrium.
//!
//! Equilibria are zeros of
//!
//! ```text
//! F_i(y) = M y_i − Σ_k m_k y_k − σ (θ_i − y_i^p) y_i,
//! ```
//!
//! whose Jacobian is `diag(d_i) − 𝟙 mᵀ` with `d_i = M + σ(p+1) y_i^p − σ θ_i`.
//! The solver is a damped Newton iteration confined to the a-priori box
//! `min θ ≤ y_i^p ≤ max θ`; the returned [`Equilibrium`] carries the
//! determinant and leading-minor certificates of local stability.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;

/// Relative tolerance used for the `θ_i = θ_j ⟺ y_i = y_j` dichotomy and
/// the shift-index comparison against `ȳ`.
pub const EQUALITY_TOL: f64 = 1e-10;

const MAX_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 40;
const BOX_SLACK: f64 = 1e-6;

/// Convictions `θ`, masses `m`, friction strength `σ` and exponent `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionGame {
    theta: Vec<f64>,
    mass: Vec<f64>,
    sigma: f64,
    p: f64,
}

impl OpinionGame {
    pub fn new(theta: Vec<f64>, mass: Vec<f64>, sigma: f64, p: f64) -> Result<Self, NashError> {
        if theta.is_empty() || theta.len() != mass.len() {
            return Err(NashError::InvalidGame { field: "theta/mass lengths", index: None });
        }
        if let Some(i) = theta.iter().position(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(NashError::InvalidGame { field: "theta", index: Some(i) });
        }
        if let Some(i) = mass.iter().position(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(NashError::InvalidGame { field: "mass", index: Some(i) });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(NashError::InvalidGame { field: "sigma", index: None });
        }
        if !(p > 0.0 && p.is_finite()) {
            return Err(NashError::InvalidGame { field: "p", index: None });
        }
        Ok(OpinionGame { theta, mass, sigma, p })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn players(&self) -> usize {
        self.theta.len()
    }

    /// Same game with a different `σ`.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self, NashError> {
        Self::new(self.theta.clone(), self.mass.clone(), sigma, self.p)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass-weighted mean conviction `Σ m_i θ_i / M`.
    pub fn mean_theta(&self) -> f64 {
        dot(&self.mass, &self.theta) / self.total_mass()
    }

    pub fn theta_min(&self) -> f64 {
        self.theta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn theta_max(&self) -> f64 {
        self.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether all convictions coincide.
    pub fn is_consensus(&self) -> bool {
        self.theta_min() == self.theta_max()
    }

    /// `θ_i^{1/p}`, the default Newton seed.
    pub fn conviction_opinions(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.powf(1.0 / self.p)).collect()
    }

    /// `[lo, hi]` with `lo^p = min θ`, `hi^p = max θ`.
    pub fn opinion_bounds(&self) -> (f64, f64) {
        (self.theta_min().powf(1.0 / self.p), self.theta_max().powf(1.0 / self.p))
    }

    /// Average opinion `ȳ = Σ m_i y_i / M`.
    pub fn mean_opinion(&self, y: &[f64]) -> f64 {
        dot(&self.mass, y) / self.total_mass()
    }

    fn check_opinions(&self, y: &[f64]) -> Result<(), NashError> {
        if y.len() != self.players() {
            return Err(NashError::Shape { expected: self.players(), found: y.len() });
        }
        match y.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            Some(index) => Err(NashError::NonPositive { index, value: y[index] }),
            None => Ok(()),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `F(y)`; equals `−ẏ` of the opinion system.
pub fn residual(y: &[f64], game: &OpinionGame) -> Result<Vec<f64>, NashError> {
    game.check_opinions(y)?;
    Ok(residual_unchecked(y, game))
}

fn residual_unchecked(y: &[f64], game: &OpinionGame) -> Vec<f64> {
    let total = game.total_mass();
    let momentum = dot(&game.mass, y);
    y.iter()
        .zip(&game.theta)
        .map(|(&yi, &ti)| total * yi - momentum - game.sigma * (ti - yi.powf(game.p)) * yi)
        .collect()
}

/// Diagonal terms `d_i = M + σ(p+1) y_i^p − σ θ_i` of the Jacobian.
pub fn diagonal_terms(y: &[f64], game: &OpinionGame) -> Result<Vec<f64>, NashError> {
    game.check_opinions(y)?;
    Ok(diagonal_unchecked(y, game))
}

fn diagonal_unchecked(y: &[f64], game: &OpinionGame) -> Vec<f64> {
    let total = game.total_mass();
    let (s, p) = (game.sigma, game.p);
    y.iter().zip(&game.theta).map(|(&yi, &ti)| total + s * (p + 1.0) * yi.powf(p) - s * ti).collect()
}

/// `D_y F = diag(d_i) − 𝟙 mᵀ`.
pub fn jacobian(y: &[f64], game: &OpinionGame) -> Result<Matrix, NashError> {
    let d = diagonal_terms(y, game)?;
    let n = d.len();
    let mut jac = Matrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            jac[(i, k)] = -game.mass[k];
        }
        jac[(i, i)] += d[i];
    }
    Ok(jac)
}

/// Jacobian determinant together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianDet {
    pub value: f64,
    /// `false` when some `d_i = 0` forced the dense LU fallback.
    pub closed_form: bool,
}

/// `det D_y F = Π d_i · (1 − Σ m_k / d_k)`, falling back to a dense LU
/// determinant when some `d_i` vanishes.
pub fn jacobian_det(y: &[f64], game: &OpinionGame) -> Result<JacobianDet, NashError> {
    let d = diagonal_terms(y, game)?;
    match rank_one_det(&d, &game.mass) {
        Some(value) => Ok(JacobianDet { value, closed_form: true }),
        None => Ok(JacobianDet { value: jacobian(y, game)?.det(), closed_form: false }),
    }
}

fn rank_one_det(d: &[f64], mass: &[f64]) -> Option<f64> {
    if d.contains(&0.0) {
        return None;
    }
    let product: f64 = d.iter().product();
    let weight: f64 = mass.iter().zip(d).map(|(m, di)| m / di).sum();
    Some(product * (1.0 - weight))
}

/// Leading principal minors `M_k = Π_{i≤k} d_i (1 − Σ_{i≤k} m_i/d_i)`,
/// `k = 1..N`, in closed form (dense fallback when some `d_i = 0`).
pub fn leading_minors(y: &[f64], game: &OpinionGame) -> Result<Vec<f64>, NashError> {
    let d = diagonal_terms(y, game)?;
    let mut dense = None;
    let mut minors = Vec::with_capacity(d.len());
    for k in 1..=d.len() {
        let minor = match rank_one_det(&d[..k], &game.mass[..k]) {
            Some(v) => v,
            None => {
                let jac = dense.get_or_insert(jacobian(y, game)?);
                jac.leading(k).det()
            }
        };
        minors.push(minor);
    }
    Ok(minors)
}

/// Solves `D_y F(y) s = rhs` using the diagonal-plus-rank-one structure
/// (Sherman-Morrison) with a dense fallback.
fn newton_direction(y: &[f64], f: &[f64], game: &OpinionGame) -> Option<Vec<f64>> {
    let d = diagonal_unchecked(y, game);
    let scale = d.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if d.iter().all(|di| di.abs() > 1e-12 * scale) {
        let dinv_f: Vec<f64> = f.iter().zip(&d).map(|(fi, di)| fi / di).collect();
        let denom = 1.0 - game.mass.iter().zip(&d).map(|(m, di)| m / di).sum::<f64>();
        if denom.abs() > 1e-12 {
            let coupling = dot(&game.mass, &dinv_f) / denom;
            return Some(dinv_f.iter().zip(&d).map(|(x, di)| -(x + coupling / di)).collect());
        }
    }
    let jac = jacobian(y, game).ok()?;
    let neg: Vec<f64> = f.iter().map(|x| -x).collect();
    jac.solve(&neg)
}

/// A solved equilibrium with its certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub y_star: Vec<f64>,
    /// `‖F(y*)‖_∞`.
    pub residual_norm: f64,
    pub jacobian_det: f64,
    /// Diagonal terms `d_i` at `y*`.
    pub diagonal: Vec<f64>,
    /// Leading principal minors `M_1..M_N` (the last one is the determinant).
    pub minors: Vec<f64>,
    pub minors_positive: bool,
    /// Number of players with `y*_i ≤ ȳ`; with `θ` sorted these are
    /// exactly the players `1..=i₀`. Ties with `ȳ` count as below.
    pub shift_index: usize,
    pub y_bar: f64,
    pub iterations: usize,
    /// Newton from the seed stalled and was restarted from the aggregate
    /// bisection.
    pub restarted: bool,
}

impl Equilibrium {
    /// `Σ_k m_k / d_k`, below one at a stable equilibrium.
    pub fn mass_weight(&self, game: &OpinionGame) -> f64 {
        game.mass.iter().zip(&self.diagonal).map(|(m, d)| m / d).sum()
    }
}

/// Convergence threshold on `‖F‖_∞`.
pub fn tolerance(game: &OpinionGame, y: &[f64]) -> f64 {
    1e-12 * (1.0 + game.sigma * game.theta_max() * max_abs(y))
}

/// Damped Newton iteration from `seed` (default `θ^{1/p}`), with step
/// halving whenever an iterate would leave the a-priori box or fail to
/// decrease `‖F‖₂`. If that stalls, the aggregate bisection of
/// [`aggregate_solution`] supplies a new start.
pub fn solve(game: &OpinionGame, seed: Option<&[f64]>) -> Result<Equilibrium, NashError> {
    let (lo, hi) = game.opinion_bounds();
    let (lo, hi) = (lo * (1.0 - BOX_SLACK), hi * (1.0 + BOX_SLACK));
    let start = match seed {
        Some(s) => {
            game.check_opinions(s)?;
            s.iter().map(|v| v.clamp(lo, hi)).collect()
        }
        None => game.conviction_opinions(),
    };
    match newton(game, start, (lo, hi)) {
        Ok((y, iterations)) => Ok(certify(game, y, iterations, false)),
        Err(_) => match newton(game, aggregate_solution(game), (lo, hi)) {
            Ok((y, iterations)) => Ok(certify(game, y, iterations, true)),
            Err((best, residual_norm)) => Err(NashError::NoConvergence { best, residual_norm }),
        },
    }
}

fn newton(game: &OpinionGame, mut y: Vec<f64>, (lo, hi): (f64, f64)) -> Result<(Vec<f64>, usize), (Vec<f64>, f64)> {
    let mut f = residual_unchecked(&y, game);
    let mut fnorm = norm2(&f);
    for iteration in 0..=MAX_ITERATIONS {
        if max_abs(&f) <= tolerance(game, &y) {
            return Ok((y, iteration));
        }
        if iteration == MAX_ITERATIONS {
            break;
        }
        let Some(step) = newton_direction(&y, &f, game) else {
            break;
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
            if trial.iter().all(|&v| v >= lo && v <= hi) {
                let ft = residual_unchecked(&trial, game);
                let nt = norm2(&ft);
                if nt < fnorm {
                    accepted = Some((trial, ft, nt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, ft, nt)) => {
                y = trial;
                f = ft;
                fnorm = nt;
            }
            None => break,
        }
    }
    let r = max_abs(&f);
    Err((y, r))
}

const BISECTIONS: usize = 300;

/// Opinion of player `i` once the aggregate `S = Σ m_k y_k` is fixed: the
/// unique positive root of `y (M − σθ_i + σ y^p) = S`, whose left side is
/// convex and vanishes at zero.
fn best_response(game: &OpinionGame, i: usize, s: f64) -> f64 {
    let total = game.total_mass();
    let g = |y: f64| y * (total - game.sigma * game.theta[i] + game.sigma * y.powf(game.p));
    let (mut a, mut b) = (0.0, 1.0);
    while g(b) < s {
        a = b;
        b *= 2.0;
    }
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if g(mid) < s {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Equilibrium found by bisection on the aggregate `S`: with every player
/// at its [`best_response`], `Σ m_k y_k(S) − S` is positive for small `S`
/// and negative for large `S`.
pub fn aggregate_solution(game: &OpinionGame) -> Vec<f64> {
    let total = game.total_mass();
    let (lo, hi) = game.opinion_bounds();
    let excess = |s: f64| (0..game.players()).map(|i| game.mass[i] * best_response(game, i, s)).sum::<f64>() - s;
    let (mut a, mut b) = (0.5 * total * lo, 2.0 * total * hi);
    while excess(a) <= 0.0 && a > f64::MIN_POSITIVE {
        a *= 0.5;
    }
    while excess(b) >= 0.0 && b < f64::MAX / 4.0 {
        b *= 2.0;
    }
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if excess(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let s = 0.5 * (a + b);
    (0..game.players()).map(|i| best_response(game, i, s)).collect()
}

fn certify(game: &OpinionGame, y: Vec<f64>, iterations: usize, restarted: bool) -> Equilibrium {
    let f = residual_unchecked(&y, game);
    let diagonal = diagonal_unchecked(&y, game);
    let minors = leading_minors(&y, game).expect("positive iterate");
    let jacobian_det = *minors.last().expect("at least one player");
    let y_bar = game.mean_opinion(&y);
    Equilibrium {
        residual_norm: max_abs(&f),
        minors_positive: minors.iter().all(|&m| m > 0.0),
        jacobian_det,
        shift_index: shift_index(&y, y_bar),
        y_bar,
        diagonal,
        minors,
        iterations,
        restarted,
        y_star: y,
    }
}

fn shift_index(y: &[f64], y_bar: f64) -> usize {
    let tol = EQUALITY_TOL * y_bar.abs().max(1.0);
    y.iter().filter(|&&v| v <= y_bar + tol).count()
}

/// Payoff `p_i(y) = σ(½θ_i y_i² − y_i^{p+2}/(p+2)) − (M/2)(ȳ − y_i)²`.
pub fn payoff(y: &[f64], game: &OpinionGame, i: usize) -> Result<f64, NashError> {
    game.check_opinions(y)?;
    Ok(deviation_payoff(game, i, y[i], game.mean_opinion(y)))
}

/// Payoff of player `i` choosing opinion `r` while the reference average
/// `ȳ` of the profile is held fixed. Its `r`-derivative is the `i`-th
/// component of the opinion vector field and its second derivative is
/// `−d_i`.
pub fn deviation_payoff(game: &OpinionGame, i: usize, r: f64, y_bar: f64) -> f64 {
    let p = game.p;
    let own = 0.5 * game.theta[i] * r * r - r.powf(p + 2.0) / (p + 2.0);
    game.sigma * own - 0.5 * game.total_mass() * (y_bar - r) * (y_bar - r)
}

/// A unilateral deviation that improves a player's payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitableDeviation {
    pub agent: usize,
    pub current: f64,
    pub better: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashCheck {
    pub verified: bool,
    pub grid: usize,
    pub deviations: Vec<ProfitableDeviation>,
}

/// Grid search of every player's best response over `r^p ∈ [min θ, max θ]`.
pub fn verify_nash(eq: &Equilibrium, game: &OpinionGame, grid: usize) -> Result<NashCheck, NashError> {
    verify_profile(&eq.y_star, game, grid)
}

/// Same as [`verify_nash`] for an arbitrary opinion profile. A player is
/// flagged when the best grid point lies more than one grid cell away from
/// its current opinion and pays strictly more.
pub fn verify_profile(y: &[f64], game: &OpinionGame, grid: usize) -> Result<NashCheck, NashError> {
    game.check_opinions(y)?;
    let grid = grid.max(1);
    let y_bar = game.mean_opinion(y);
    let (tmin, tmax) = (game.theta_min(), game.theta_max());
    let point = |k: usize| (tmin + (tmax - tmin) * k as f64 / grid as f64).powf(1.0 / game.p);

    let mut deviations = Vec::new();
    for (i, &current) in y.iter().enumerate() {
        let mut best = (0usize, f64::NEG_INFINITY);
        for k in 0..=grid {
            let value = deviation_payoff(game, i, point(k), y_bar);
            if value > best.1 {
                best = (k, value);
            }
        }
        let r_best = point(best.0);
        let cell = (point((best.0 + 1).min(grid)) - point(best.0.saturating_sub(1))).abs();
        let here = deviation_payoff(game, i, current, y_bar);
        let gain = best.1 - here;
        if (r_best - current).abs() > cell && gain > 0.0 {
            deviations.push(ProfitableDeviation { agent: i, current, better: r_best, gain });
        }
    }
    Ok(NashCheck { verified: deviations.is_empty(), grid, deviations })
}

/// One failed structural check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureViolation {
    pub check: &'static str,
    pub agent: usize,
    pub value: f64,
}

/// Ordering, equality pattern, lower bounds and shift split of an
/// equilibrium. Players are compared in ascending `θ` order; `order`
/// records that permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub order: Vec<usize>,
    pub monotone: bool,
    pub equality_pattern: bool,
    pub within_bounds: bool,
    pub lower_bound: bool,
    pub shift_index: usize,
    pub shift_consistent: bool,
    pub violations: Vec<StructureViolation>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn structure_report(eq: &Equilibrium, game: &OpinionGame) -> Result<StructureReport, NashError> {
    let y = &eq.y_star;
    game.check_opinions(y)?;
    let n = game.players();
    let p = game.p;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| game.theta[a].total_cmp(&game.theta[b]));

    let ytol = EQUALITY_TOL * max_abs(y).max(1.0);
    let ttol = EQUALITY_TOL * game.theta_max().max(1.0);
    let mut violations = Vec::new();
    let mut fail = |check, agent, value| violations.push(StructureViolation { check, agent, value });

    let mut monotone = true;
    for w in order.windows(2) {
        if y[w[1]] < y[w[0]] - ytol {
            monotone = false;
            fail("monotone", w[1], y[w[1]] - y[w[0]]);
        }
    }

    let mut equality_pattern = true;
    for a in 0..n {
        for b in a + 1..n {
            let same_theta = game.theta[a] == game.theta[b];
            let same_y = (y[a] - y[b]).abs() <= ytol;
            if same_theta != same_y {
                equality_pattern = false;
                fail("equality_pattern", b, y[a] - y[b]);
            }
        }
    }

    let mut within_bounds = true;
    let (tmin, tmax) = (game.theta_min(), game.theta_max());
    for (i, &yi) in y.iter().enumerate() {
        let yp = yi.powf(p);
        if yp < tmin - ttol || yp > tmax + ttol {
            within_bounds = false;
            fail("minmax", i, yp);
        }
    }

    let total = game.total_mass();
    let mut lower_bound = true;
    let mut tail_mass: f64 = game.mass.iter().sum();
    for &i in &order {
        let bound = game.theta[i] + (tail_mass - total) / game.sigma;
        if y[i].powf(p) < bound - ttol {
            lower_bound = false;
            fail("lower_bound", i, y[i].powf(p) - bound);
        }
        tail_mass -= game.mass[i];
    }

    let shift_index = eq.shift_index;
    let mut shift_consistent = true;
    for (rank, &i) in order.iter().enumerate() {
        let gap = y[i].powf(p) - game.theta[i];
        let ok = if rank < shift_index { gap >= -ttol } else { gap <= ttol };
        let side_ok = if rank < shift_index { y[i] <= eq.y_bar + ytol } else { y[i] >= eq.y_bar - ytol };
        if !(ok && side_ok) {
            shift_consistent = false;
            fail("shift", i, gap);
        }
    }

    Ok(StructureReport {
        order,
        monotone,
        equality_pattern,
        within_bounds,
        lower_bound,
        shift_index,
        shift_consistent,
        violations,
    })
}

/// Distances of `y*(σ)` from the two limiting profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    /// `‖y*(σ) − θ^{1/p}‖_∞`, vanishing as `σ → ∞`.
    pub to_convictions: f64,
    /// `‖y*(σ) − θ̄^{1/p} 𝟙‖_∞`, vanishing as `σ → 0`.
    pub to_consensus: f64,
}

pub fn asymptotic_sweep(game: &OpinionGame, sigmas: &[f64]) -> Result<Vec<SweepRow>, NashError> {
    let consensus = game.mean_theta().powf(1.0 / game.p);
    let convictions = game.conviction_opinions();
    sigmas
        .iter()
        .map(|&sigma| {
            let g = game.with_sigma(sigma)?;
            let eq = solve(&g, None)?;
            let to_convictions =
                eq.y_star.iter().zip(&convictions).fold(0.0f64, |a, (y, c)| a.max((y - c).abs()));
            let to_consensus = eq.y_star.iter().fold(0.0f64, |a, y| a.max((y - consensus).abs()));
            Ok(SweepRow { sigma, to_convictions, to_consensus })
        })
        .collect()
}

/// Whether, ordered by increasing `σ`, distances to the convictions do not
/// grow and distances to the consensus do not shrink (within `tol`).
pub fn sweep_is_monotone(rows: &[SweepRow], tol: f64) -> bool {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
    sorted.windows(2).all(|w| {
        w[1].to_convictions <= w[0].to_convictions + tol && w[1].to_consensus + tol >= w[0].to_consensus
    })
}

/// Agreement of Newton solves started from uniform random seeds in the
/// a-priori box.
#[derive(Debug, Clone, PartialEq)]
pub struct Multistart {
    pub reference: Vec<f64>,
    pub starts: usize,
    pub agreeing: usize,
    /// Starts whose Newton run stalled and needed the aggregate restart.
    pub restarted: usize,
    pub failures: usize,
    pub max_deviation: f64,
}

pub fn multistart(game: &OpinionGame, starts: usize, seed: u64, tol: f64) -> Result<Multistart, NashError> {
    let reference = solve(game, None)?.y_star;
    let (lo, hi) = game.opinion_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Multistart { reference, starts, agreeing: 0, restarted: 0, failures: 0, max_deviation: 0.0 };
    let mut start = vec![0.0; game.players()];
    for _ in 0..starts {
        for s in start.iter_mut() {
            *s = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        }
        match solve(game, Some(&start)) {
            Ok(eq) => {
                let dev = eq.y_star.iter().zip(&report.reference).fold(0.0f64, |a, (x, r)| a.max((x - r).abs()));
                report.max_deviation = report.max_deviation.max(dev);
                report.restarted += usize::from(eq.restarted);
                if dev <= tol {
                    report.agreeing += 1;
                }
            }
            Err(_) => report.failures += 1,
        }
    }
    Ok(report)
}

/// `(⟨y, θ⟩_m, ‖y‖_{p+1,m}^{p+1})`; the two agree at any equilibrium.
pub fn momentum_identity(y: &[f64], game: &OpinionGame) -> (f64, f64) {
    let lhs = y.iter().zip(&game.theta).zip(&game.mass).map(|((y, t), m)| m * y * t).sum();
    let rhs = y.iter().zip(&game.mass).map(|(y, m)| m * y.powf(game.p + 1.0)).sum();
    (lhs, rhs)
}

#[derive(Debug, Clone, PartialEq)]
pub enum NashError {
    InvalidGame { field: &'static str, index: Option<usize> },
    Shape { expected: usize, found: usize },
    NonPositive { index: usize, value: f64 },
    NoConvergence { best: Vec<f64>, residual_norm: f64 },
}

impl fmt::Display for NashError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NashError::InvalidGame { field, index: Some(i) } => write!(f, "invalid game: {field}[{i}] must be positive"),
            NashError::InvalidGame { field, index: None } => write!(f, "invalid game: bad {field}"),
            NashError::Shape { expected, found } => write!(f, "expected {expected} opinions, found {found}"),
            NashError::NonPositive { index, value } => write!(f, "opinion {index} must be positive, got {value}"),
            NashError::NoConvergence { residual_norm, .. } => {
                write!(f, "Newton iteration did not converge (best residual {residual_norm:e})")
            }
        }
    }
}

impl core::error::Error for NashError {}
