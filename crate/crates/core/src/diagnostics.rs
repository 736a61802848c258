//! Spreads, angles and exponential-rate fits.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;

use crate::model::{self, FlockState};

/// Diagnostics of one state. Quantities that need every speed to be
/// nonzero are `None` when some agent is at rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsFrame {
    /// `max_{i,j} |v_i − v_j|`.
    pub a: f64,
    /// `max_{i,j} |θ_i − θ_j|`.
    pub b: f64,
    /// `max_{i,j} |x_i − x_j|`.
    pub d: f64,
    /// `max_i |v_i|² / min_i |v_i|²`.
    pub r: Option<f64>,
    /// Largest pairwise angle between velocities.
    pub gamma: Option<f64>,
    /// Largest pairwise angle after projecting onto planes through `e_n`.
    pub gamma2d: Option<f64>,
    /// `min_i v_iⁿ / |v_i|`.
    pub margin: Option<f64>,
}

/// Default plane grid: 64 directions when `n = 3`, 256 above.
pub fn default_grid(dim: usize) -> usize {
    if dim <= 3 {
        64
    } else {
        256
    }
}

pub fn frame(state: &FlockState, grid: Option<usize>) -> DiagnosticsFrame {
    let any_rest = (0..state.agents()).any(|i| state.speed(i) == 0.0);
    let gamma2d = match grid {
        Some(g) if !any_rest => gamma2d(state, g).map(|p| p.value),
        _ => None,
    };
    DiagnosticsFrame {
        a: max_pairwise(state.agents(), |i, j| model::distance(state.velocity(i), state.velocity(j))),
        b: max_pairwise(state.agents(), |i, j| (state.theta[i] - state.theta[j]).abs()),
        d: max_pairwise(state.agents(), |i, j| model::distance(state.position(i), state.position(j))),
        r: speed_ratio(state),
        gamma: if any_rest { None } else { gamma(state) },
        gamma2d,
        margin: model::sector_margin(state).ok(),
    }
}

fn max_pairwise(n: usize, f: impl Fn(usize, usize) -> f64) -> f64 {
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            best = best.max(f(i, j));
        }
    }
    best
}

pub fn speed_ratio(state: &FlockState) -> Option<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..state.agents() {
        let s = model::norm(state.velocity(i)).powi(2);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (lo > 0.0).then(|| hi / lo)
}

/// Angle between two nonzero vectors, accurate for nearly parallel and
/// nearly opposite pairs.
pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (model::norm(a), model::norm(b));
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (u, w) = (x / na, y / nb);
        diff += (u - w) * (u - w);
        sum += (u + w) * (u + w);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Largest pairwise velocity angle; `None` if some agent is at rest.
pub fn gamma(state: &FlockState) -> Option<f64> {
    if (0..state.agents()).any(|i| state.speed(i) == 0.0) {
        return None;
    }
    Some(max_pairwise(state.agents(), |i, j| angle(state.velocity(i), state.velocity(j))))
}

/// Coordinates of `v` in the orthonormal frame `(u, e_n)`, where the unit
/// vector `u` lives in the first `n − 1` coordinates.
pub fn project_plane(v: &[f64], u: &[f64]) -> Result<[f64; 2], DiagnosticsError> {
    if v.len() < 2 || u.len() + 1 != v.len() {
        return Err(DiagnosticsError::LengthMismatch);
    }
    let len = model::norm(u);
    if (len - 1.0).abs() > 1e-12 {
        return Err(DiagnosticsError::NotUnit(len));
    }
    Ok(project_unchecked(v, u))
}

#[inline]
fn project_unchecked(v: &[f64], u: &[f64]) -> [f64; 2] {
    let n = v.len();
    [model::dot(&v[..n - 1], u), v[n - 1]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedAngle {
    pub value: f64,
    /// Number of (plane, agent) pairs skipped because the projection vanished.
    pub skipped: usize,
}

/// `max` over planes containing `e_n` of the largest pairwise angle between
/// projected velocities. Uses a direction grid of size `grid` and, in
/// addition, the horizontal parts of all pairwise differences of velocities
/// and of unit velocities. `None` for `n = 1`.
pub fn gamma2d(state: &FlockState, grid: usize) -> Option<ProjectedAngle> {
    let n = state.dim();
    if n == 1 {
        return None;
    }
    if n == 2 {
        return gamma(state).map(|value| ProjectedAngle { value, skipped: 0 });
    }
    let mut dirs = horizontal_grid(n - 1, grid);
    let agents = state.agents();
    let units: Vec<Vec<f64>> = (0..agents)
        .map(|i| {
            let v = state.velocity(i);
            let s = model::norm(v);
            v.iter().map(|x| x / s).collect()
        })
        .collect();
    for i in 0..agents {
        for j in i + 1..agents {
            for (a, b) in [(state.velocity(i), state.velocity(j)), (&units[i][..], &units[j][..])] {
                let h: Vec<f64> = a[..n - 1].iter().zip(&b[..n - 1]).map(|(x, y)| x - y).collect();
                let len = model::norm(&h);
                if len > 0.0 {
                    dirs.push(h.iter().map(|x| x / len).collect());
                }
            }
        }
    }

    let mut best = 0.0f64;
    let mut skipped = 0;
    let mut polar = Vec::with_capacity(agents);
    for u in &dirs {
        polar.clear();
        for i in 0..agents {
            let [a, b] = project_unchecked(state.velocity(i), u);
            if a == 0.0 && b == 0.0 {
                skipped += 1;
            } else {
                polar.push(b.atan2(a));
            }
        }
        for (k, &p) in polar.iter().enumerate() {
            for &q in &polar[k + 1..] {
                let mut d = (p - q).abs();
                if d > PI {
                    d = 2.0 * PI - d;
                }
                best = best.max(d);
            }
        }
    }
    Some(ProjectedAngle { value: best, skipped })
}

/// Unit directions in `ℝᵏ`: evenly spaced on the circle for `k = 2`, a
/// Fibonacci lattice for `k = 3`, seeded Gaussian samples above.
fn horizontal_grid(k: usize, size: usize) -> Vec<Vec<f64>> {
    let size = size.max(1);
    match k {
        1 => alloc::vec![alloc::vec![1.0]],
        2 => (0..size)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / size as f64;
                alloc::vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..size)
                .map(|j| {
                    let z = 1.0 - 2.0 * (j as f64 + 0.5) / size as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * j as f64;
                    alloc::vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + k as u64);
            let mut out = Vec::with_capacity(size);
            while out.len() < size {
                let g: Vec<f64> = (0..k).map(|_| gaussian(&mut rng)).collect();
                let len = model::norm(&g);
                if len > 1e-12 {
                    out.push(g.iter().map(|x| x / len).collect());
                }
            }
            out
        }
    }
}

/// Standard normal sample by Box–Muller.
pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Least-squares fit `log f(t) ≈ intercept + rate · t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Number of points used.
    pub points: usize,
    pub window: (f64, f64),
}

/// Minimum number of samples inside a fit window.
pub const MIN_FIT_POINTS: usize = 10;

/// Fits `values` over samples with `t` in `[t0, t1]`. Every value used must
/// be positive and finite.
pub fn fit_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateFit, DiagnosticsError> {
    if times.len() != values.len() {
        return Err(DiagnosticsError::LengthMismatch);
    }
    let mut pts = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(DiagnosticsError::NonPositive { t, value: v });
        }
        pts.push((t, v.ln()));
    }
    let k = pts.len();
    if k < MIN_FIT_POINTS {
        return Err(DiagnosticsError::TooFewPoints(k));
    }
    let kf = k as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / kf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / kf;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in &pts {
        stt += (t - mt) * (t - mt);
        sty += (t - mt) * (y - my);
        syy += (y - my) * (y - my);
    }
    if stt == 0.0 {
        return Err(DiagnosticsError::DegenerateWindow);
    }
    let rate = sty / stt;
    let intercept = my - rate * mt;
    let ss_res: f64 = pts.iter().map(|&(t, y)| (y - intercept - rate * t).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit { rate, intercept, r_squared, points: k, window })
}

/// Second half of the initial stretch on which `values` stays at or above
/// `floor`: `[t0 + (t_b − t0)/2, t_b]` with `t_b` the last sample before the
/// first drop below `floor`. Useful for series that decay into round-off.
pub fn floor_window(times: &[f64], values: &[f64], floor: f64) -> Option<(f64, f64)> {
    let t0 = *times.first()?;
    let mut end = None;
    for (&t, &v) in times.iter().zip(values) {
        if !(v >= floor) {
            break;
        }
        end = Some(t);
    }
    let end = end?;
    (end > t0).then_some((t0 + 0.5 * (end - t0), end))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiagnosticsError {
    LengthMismatch,
    TooFewPoints(usize),
    DegenerateWindow,
    NonPositive { t: f64, value: f64 },
    NotUnit(f64),
}

impl fmt::Display for DiagnosticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticsError::LengthMismatch => f.write_str("times and values differ in length"),
            DiagnosticsError::TooFewPoints(k) => write!(f, "rate fit needs {MIN_FIT_POINTS} samples in the window, got {k}"),
            DiagnosticsError::DegenerateWindow => f.write_str("all samples in the window share one time"),
            DiagnosticsError::NotUnit(len) => write!(f, "plane direction has length {len}, expected 1"),
            DiagnosticsError::NonPositive { t, value } => write!(f, "cannot take log of {value} at t = {t}"),
        }
    }
}

impl core::error::Error for DiagnosticsError {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn floor_window_stops_at_first_drop() {
        let t: Vec<f64> = (0..11).map(|k| k as f64).collect();
        let v = [1.0, 0.5, 0.1, 1e-3, 1e-5, 1e-21, 1e-3, 1e-30, 1e-30, 1e-30, 1e-30];
        assert_eq!(floor_window(&t, &v, 1e-20), Some((2.0, 4.0)));
        assert_eq!(floor_window(&t, &[1e-30; 11], 1e-20), None);
        assert_eq!(floor_window(&t, &[1.0; 11], 1e-20), Some((5.0, 10.0)));
    }

    fn state(dim: usize, v: Vec<f64>) -> FlockState {
        let agents = v.len() / dim;
        FlockState::new(dim, vec![0.0; v.len()], v, vec![1.0; agents], vec![1.0; agents]).unwrap()
    }

    #[test]
    fn spreads_on_a_small_example() {
        let st = FlockState::new(
            2,
            vec![0.0, 0.0, 3.0, 4.0, 1.0, 1.0],
            vec![1.0, 0.0, 0.0, 2.0, 1.0, 1.0],
            vec![0.5, 2.0, 1.0],
            vec![1.0; 3],
        )
        .unwrap();
        let f = frame(&st, Some(16));
        assert_eq!(f.d, 5.0);
        assert_relative_eq!(f.a, 5f64.sqrt(), max_relative = 1e-15);
        assert_eq!(f.b, 1.5);
        assert_eq!(f.r, Some(4.0));
        assert_relative_eq!(f.gamma.unwrap(), PI / 2.0, max_relative = 1e-15);
        assert_eq!(f.gamma2d, f.gamma);
        assert_eq!(f.margin, Some(0.0));
    }

    #[test]
    fn resting_agent_leaves_angles_undefined() {
        let f = frame(&state(2, vec![1.0, 1.0, 0.0, 0.0]), Some(8));
        assert_eq!((f.r, f.gamma, f.gamma2d, f.margin), (None, None, None, None));
    }

    #[test]
    fn angle_is_accurate_for_tiny_separation() {
        let eps = 1e-9;
        let a = angle(&[1.0, 0.0], &[eps.cos(), eps.sin()]);
        assert_relative_eq!(a, eps, max_relative = 1e-6);
        let a = angle(&[1.0, 0.0], &[-1.0, 1e-12]);
        assert_relative_eq!(a, PI - 1e-12, max_relative = 1e-15);
    }

    #[test]
    fn projected_angle_in_three_dimensions() {
        // Both tilted 45° from e_3, in planes 90° apart around it. The true
        // angle is 60°; the plane through e_3 and e_1 − e_2 sees
        // 2·atan(1/√2) ≈ 70.5°.
        let s = 0.5f64.sqrt();
        let st = state(3, vec![s, 0.0, s, 0.0, s, s]);
        let g = gamma(&st).unwrap();
        assert_relative_eq!(g, PI / 3.0, max_relative = 1e-14);
        let p = gamma2d(&st, 64).unwrap();
        assert_relative_eq!(p.value, 2.0 * 0.5f64.sqrt().atan(), max_relative = 1e-12);
        assert!(p.value >= g);
    }

    #[test]
    fn horizontal_velocities_project_to_zero_on_orthogonal_planes() {
        // Only the first grid direction, u = (1, 0), is exactly orthogonal.
        let st = state(3, vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let p = gamma2d(&st, 4).unwrap();
        assert_eq!(p.value, 0.0);
        assert_eq!(p.skipped, 2);
    }

    #[test]
    fn grids_are_unit() {
        for k in 2..6 {
            for u in horizontal_grid(k, 40) {
                assert_relative_eq!(model::norm(&u), 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn rate_fit_recovers_exponential() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let fit = fit_rate(&t, &v, (1.0, 8.0)).unwrap();
        assert_relative_eq!(fit.rate, -0.7, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 3f64.ln(), max_relative = 1e-12);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert_eq!(fit.points, 36);
    }

    #[test]
    fn rate_fit_edge_cases() {
        let t: Vec<f64> = (0..20).map(f64::from).collect();
        let c = fit_rate(&t, &[2.0; 20], (0.0, 19.0)).unwrap();
        assert_eq!((c.rate, c.r_squared), (0.0, 1.0));
        let mut v = vec![1.0; 20];
        v[4] = 0.0;
        assert!(matches!(fit_rate(&t, &v, (0.0, 19.0)), Err(DiagnosticsError::NonPositive { .. })));
        assert!(fit_rate(&t, &v, (5.0, 19.0)).is_ok());
        assert_eq!(fit_rate(&t, &[1.0; 20], (0.5, 5.5)), Err(DiagnosticsError::TooFewPoints(5)));
        assert_eq!(fit_rate(&t, &[1.0; 2], (0.0, 2.0)), Err(DiagnosticsError::LengthMismatch));
    }

    #[test]
    fn rate_fit_hundred_point_exponential() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.05).collect();
        let v: Vec<f64> = t.iter().map(|t| 5.0 * (-2.0 * t).exp()).collect();
        let fit = fit_rate(&t, &v, (0.0, 5.0)).unwrap();
        assert!((fit.rate + 2.0).abs() < 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_plane(&[3.0, 4.0, 5.0], &[1.0, 0.0]).unwrap(), [3.0, 5.0]);
        assert_eq!(project_plane(&[0.0, 0.0, 2.0], &[0.6, 0.8]).unwrap(), [0.0, 2.0]);
        let s = 0.5f64.sqrt();
        let [a, b] = project_plane(&[1.0, 1.0, 0.0], &[s, s]).unwrap();
        assert_relative_eq!(a, 2f64.sqrt(), max_relative = 1e-15);
        assert_eq!(b, 0.0);
        assert!(matches!(project_plane(&[1.0, 1.0, 0.0], &[1.0, 1.0]), Err(DiagnosticsError::NotUnit(_))));
    }

    #[test]
    fn identical_agents_and_collinear_pairs() {
        let f = frame(&state(3, [0.2, 0.1, 1.0].repeat(4)), Some(16));
        assert_eq!((f.a, f.b, f.d, f.r, f.gamma, f.gamma2d), (0.0, 0.0, 0.0, Some(1.0), Some(0.0), Some(0.0)));
        let f = frame(&state(2, vec![0.0, 2.0, 0.0, 1.0]), None);
        assert_eq!((f.r, f.gamma), (Some(4.0), Some(0.0)));
        let f = frame(&state(2, vec![1.0, 0.0, 0.0, 1.0]), None);
        assert_relative_eq!(f.a, 2f64.sqrt(), max_relative = 1e-15);
    }

    fn sphere_point(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, n).prop_filter("nonzero", |v| model::norm(v) > 1e-3)
    }

    proptest! {
        #[test]
        fn projected_angle_dominates_true_angle(
            v in proptest::collection::vec(sphere_point(3), 2..6)
        ) {
            let st = FlockState::from_rows(&vec![vec![0.0; 3]; v.len()], &v, vec![1.0; v.len()], vec![1.0; v.len()]).unwrap();
            let g = gamma(&st).unwrap();
            let p = gamma2d(&st, 64).unwrap();
            prop_assert!(p.value >= g - 1e-12, "{} < {}", p.value, g);
            prop_assert!(p.value <= PI + 1e-12);
        }

        #[test]
        fn angle_matches_arccos_when_well_conditioned(a in sphere_point(4), b in sphere_point(4)) {
            let c = model::dot(&a, &b) / (model::norm(&a) * model::norm(&b));
            prop_assume!(c.abs() < 0.99);
            prop_assert!((angle(&a, &b) - c.acos()).abs() < 1e-12);
        }

        #[test]
        fn spreads_invariant_under_permutation(
            v in proptest::collection::vec(sphere_point(2), 2..6), shift in 0usize..5
        ) {
            let k = v.len();
            let rot: Vec<Vec<f64>> = (0..k).map(|i| v[(i + shift) % k].clone()).collect();
            let x = vec![vec![0.0; 2]; k];
            let s1 = FlockState::from_rows(&x, &v, vec![1.0; k], vec![1.0; k]).unwrap();
            let s2 = FlockState::from_rows(&x, &rot, vec![1.0; k], vec![1.0; k]).unwrap();
            let (f1, f2) = (frame(&s1, Some(8)), frame(&s2, Some(8)));
            prop_assert_eq!((f1.a, f1.b, f1.d, f1.r, f1.margin), (f2.a, f2.b, f2.d, f2.r, f2.margin));
            prop_assert!((f1.gamma.unwrap() - f2.gamma.unwrap()).abs() < 1e-14);
        }
    }
}
