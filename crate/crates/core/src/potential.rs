//! The opinion system as a gradient flow in `z_i = √m_i · y_i`.
//!
//! With `M = Σ m_j`,
//! `Φ(z) = −½(Σ √m_j z_j)² + ½ Σ (M − σθ_j) z_j² + σ/(p+2) Σ z_j^{p+2} / m_j^{p/2}`
//! and `ż = −∇Φ(z)` is the opinion system after rescaling.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::model;
use crate::nash::{NashError, OpinionGame};

/// Opinions in gradient-flow coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledState {
    pub z: Vec<f64>,
}

impl RescaledState {
    pub fn from_opinions(y: &[f64], game: &OpinionGame) -> Result<Self, NashError> {
        check(y, game)?;
        Ok(RescaledState { z: y.iter().zip(game.mass()).map(|(y, m)| m.sqrt() * y).collect() })
    }

    pub fn to_opinions(&self, game: &OpinionGame) -> Vec<f64> {
        self.z.iter().zip(game.mass()).map(|(z, m)| z / m.sqrt()).collect()
    }
}

fn check(v: &[f64], game: &OpinionGame) -> Result<(), NashError> {
    if v.len() != game.players() {
        return Err(NashError::Shape { expected: game.players(), found: v.len() });
    }
    match v.iter().position(|x| !(*x > 0.0)) {
        Some(index) => Err(NashError::NonPositive { index, value: v[index] }),
        None => Ok(()),
    }
}

pub fn potential(z: &[f64], game: &OpinionGame) -> Result<f64, NashError> {
    check(z, game)?;
    let (sigma, p) = (game.sigma(), game.p());
    let total = game.total_mass();
    let mut s = 0.0;
    let mut quad = 0.0;
    let mut high = 0.0;
    for ((&z, &m), &theta) in z.iter().zip(game.mass()).zip(game.theta()) {
        s += m.sqrt() * z;
        quad += (total - sigma * theta) * z * z;
        high += z.powf(p + 2.0) / m.powf(0.5 * p);
    }
    Ok(-0.5 * s * s + 0.5 * quad + sigma / (p + 2.0) * high)
}

pub fn gradient(z: &[f64], game: &OpinionGame) -> Result<Vec<f64>, NashError> {
    check(z, game)?;
    let (sigma, p) = (game.sigma(), game.p());
    let total = game.total_mass();
    let s: f64 = z.iter().zip(game.mass()).map(|(z, m)| m.sqrt() * z).sum();
    Ok(z.iter()
        .zip(game.mass())
        .zip(game.theta())
        .map(|((&z, &m), &theta)| {
            -m.sqrt() * s + (total - sigma * theta) * z + sigma * z.powf(p + 1.0) / m.powf(0.5 * p)
        })
        .collect())
}

/// Per-sample tolerance on increases of `Φ` along an unperturbed flow.
pub const DESCENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    pub phi: Vec<f64>,
    /// `Σ_k |z_{k+1} − z_k|` over the recorded samples.
    pub arc_length: f64,
    /// Largest `Φ(t_{k+1}) − Φ(t_k)`; negative when strictly decreasing.
    pub max_increase: f64,
    /// `Φ` nonincreasing within [`DESCENT_TOL`] per sample.
    pub monotone: bool,
    pub final_gradient_norm: f64,
}

/// Summarizes a recorded trajectory `z(t_k)` of the gradient flow, possibly
/// perturbed. Monotonicity is only meaningful for unperturbed runs.
pub fn descent_monitor(zs: &[Vec<f64>], game: &OpinionGame) -> Result<DescentReport, NashError> {
    let phi = zs.iter().map(|z| potential(z, game)).collect::<Result<Vec<_>, _>>()?;
    let arc_length = zs.windows(2).map(|w| model::distance(&w[0], &w[1])).sum();
    let max_increase = phi.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let final_gradient_norm = match zs.last() {
        Some(z) => model::norm(&gradient(z, game)?),
        None => 0.0,
    };
    Ok(DescentReport {
        monotone: !(max_increase > DESCENT_TOL),
        phi,
        arc_length,
        max_increase,
        final_gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_opinion, rhs_opinion, IntegratorSpec};
    use crate::nash;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn game_strategy() -> impl Strategy<Value = (OpinionGame, Vec<f64>)> {
        (1usize..7).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.2f64..3.0, n),
                proptest::collection::vec(0.1f64..2.0, n),
                0.1f64..5.0,
                0.5f64..3.0,
                proptest::collection::vec(0.1f64..2.5, n),
            )
                .prop_map(|(theta, mass, sigma, p, y)| (OpinionGame::new(theta, mass, sigma, p).unwrap(), y))
        })
    }

    #[test]
    fn single_player_values() {
        let g = OpinionGame::new(vec![1.0], vec![1.0], 1.0, 2.0).unwrap();
        assert_relative_eq!(potential(&[1.0], &g).unwrap(), -0.25, max_relative = 1e-15);
        assert_eq!(gradient(&[1.0], &g).unwrap(), vec![0.0]);
    }

    #[test]
    fn consensus_is_critical() {
        let g = OpinionGame::new(vec![2.0; 4], vec![0.1, 0.4, 0.2, 0.3], 1.5, 3.0).unwrap();
        let z = RescaledState::from_opinions(&g.conviction_opinions(), &g).unwrap().z;
        assert!(model::norm(&gradient(&z, &g).unwrap()) <= 1e-12);
    }

    #[test]
    fn solver_output_is_critical() {
        let g = OpinionGame::new(vec![0.5, 1.0, 2.5], vec![0.2, 0.5, 0.3], 2.0, 2.0).unwrap();
        let eq = nash::solve(&g, None).unwrap();
        let z = RescaledState::from_opinions(&eq.y_star, &g).unwrap().z;
        assert!(model::norm(&gradient(&z, &g).unwrap()) <= 1e-10);
    }

    #[test]
    fn rejects_nonpositive() {
        let g = OpinionGame::new(vec![1.0; 2], vec![1.0; 2], 1.0, 1.0).unwrap();
        assert!(potential(&[1.0, 0.0], &g).is_err());
        assert!(gradient(&[1.0], &g).is_err());
    }

    #[test]
    fn descent_converges_to_equilibrium() {
        let g = OpinionGame::new(vec![0.4, 1.3, 2.0, 0.9], vec![0.25; 4], 1.0, 2.0).unwrap();
        let eq = nash::solve(&g, None).unwrap();
        let spec = IntegratorSpec { dt: 0.01, t_final: 500.0, record_every: 10 };
        let run = integrate_opinion(&[2.0, 0.1, 0.5, 1.0], &g, &spec, |_, y| {
            let z = RescaledState::from_opinions(y, &g).unwrap().z;
            model::norm(&gradient(&z, &g).unwrap()) < 1e-10
        })
        .unwrap();
        let zs: Vec<Vec<f64>> = run.iter().map(|(_, y)| RescaledState::from_opinions(y, &g).unwrap().z).collect();
        let report = descent_monitor(&zs, &g).unwrap();
        assert!(report.monotone, "max increase {}", report.max_increase);
        assert!(report.final_gradient_norm < 1e-10);
        assert!(report.arc_length.is_finite());
        let end = RescaledState { z: zs.last().unwrap().clone() }.to_opinions(&g);
        for (a, b) in end.iter().zip(&eq.y_star) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn speeds_of_full_flock_settle_at_rescaled_equilibrium() {
        use crate::dynamics::{integrate, opinion_defect, Probes};
        use crate::model::{Kernel, SystemParams};
        use crate::scenarios::{random_sectorial, SpreadKnobs};

        let state = random_sectorial(3, 5, 3, 0.3, &SpreadKnobs::default()).unwrap();
        let params = SystemParams { sigma: 0.8, kappa: 0.0, p: 2.0, kernel: Kernel::Uniform { level: 1.0 } };
        let g = OpinionGame::new(state.theta.clone(), state.mass.clone(), params.sigma, params.p).unwrap();
        let eq = nash::solve(&g, None).unwrap();
        let spec = IntegratorSpec { dt: 0.01, t_final: 60.0, record_every: 20 };
        let traj = integrate(&state, &params, &spec, &Probes::none()).unwrap();
        let zs: Vec<Vec<f64>> = traj
            .samples
            .iter()
            .map(|s| {
                let y: Vec<f64> = (0..s.state.agents()).map(|i| s.state.speed(i)).collect();
                RescaledState::from_opinions(&y, &g).unwrap().z
            })
            .collect();
        let report = descent_monitor(&zs, &g).unwrap();
        let z_star = RescaledState::from_opinions(&eq.y_star, &g).unwrap().z;
        assert!(model::distance(zs.last().unwrap(), &z_star) < 1e-4);
        assert!(report.final_gradient_norm < 1e-4);
        let first = opinion_defect(&traj.samples[0].state, &params).unwrap();
        let last = opinion_defect(&traj.last().state, &params).unwrap();
        let size = |d: &[f64]| d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(size(&first) > 1e-2 && size(&last) < 1e-8, "{first:?} {last:?}");
    }

    fn central_difference(z: &[f64], g: &OpinionGame, rel: f64) -> Vec<f64> {
        (0..z.len())
            .map(|i| {
                let h = rel * z[i];
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[i] += h;
                zm[i] -= h;
                (potential(&zp, g).unwrap() - potential(&zm, g).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn gradient_is_rescaled_opinion_field((g, y) in game_strategy()) {
            let z = RescaledState::from_opinions(&y, &g).unwrap().z;
            let grad = gradient(&z, &g).unwrap();
            let rhs = rhs_opinion(&y, &g).unwrap();
            for ((gr, r), m) in grad.iter().zip(&rhs).zip(g.mass()) {
                let scale = 1.0 + r.abs() + gr.abs();
                prop_assert!((gr + m.sqrt() * r).abs() <= 1e-12 * scale * 10.0);
            }
        }

        #[test]
        fn gradient_matches_central_differences((g, y) in game_strategy()) {
            let z = RescaledState::from_opinions(&y, &g).unwrap().z;
            let grad = gradient(&z, &g).unwrap();
            let fd = central_difference(&z, &g, 1e-5);
            let gmax = grad.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            prop_assume!(gmax > 1e-6);
            let err = fd.iter().zip(&grad).fold(0.0f64, |a, (f, g)| a.max((f - g).abs()));
            prop_assert!(err <= 1e-6 * gmax, "{:?} vs {:?}", fd, grad);
        }

        #[test]
        fn equal_masses_reduce_to_opinion_potential(
            n in 1usize..7,
            seed in proptest::collection::vec((0.2f64..3.0, 0.1f64..2.5), 7),
            sigma in 0.1f64..5.0,
            p in 0.5f64..3.0,
        ) {
            let (theta, y): (Vec<f64>, Vec<f64>) = seed[..n].iter().copied().unzip();
            let nf = n as f64;
            let g = OpinionGame::new(theta.clone(), vec![1.0 / nf; n], sigma, p).unwrap();
            let z = RescaledState::from_opinions(&y, &g).unwrap().z;
            let sum: f64 = y.iter().sum();
            let direct = -sum * sum / (2.0 * nf)
                - 0.5 * y.iter().zip(&theta).map(|(y, t)| (sigma * t - 1.0) * y * y).sum::<f64>()
                + sigma / (p + 2.0) * y.iter().map(|y| y.powf(p + 2.0)).sum::<f64>();
            let via_z = nf * potential(&z, &g).unwrap();
            prop_assert!((via_z - direct).abs() <= 1e-11 * (1.0 + direct.abs()));
        }
    }
}
