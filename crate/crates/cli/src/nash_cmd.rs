//! `nash`: solve, certify and sweep an opinion game.

use std::io;
use std::path::{Path, PathBuf};

use csflock_core::nash::{self, SweepRow};

use crate::config::GameConfig;
use crate::output::{fmt_list, fmt_sig12, Report};

/// Agreement required between multistart solves.
pub const MULTISTART_TOL: f64 = 1e-8;
/// Relative tolerance on the momentum identity.
pub const MOMENTUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NashOutcome {
    pub report: Report,
    pub passed: bool,
    pub sweep: Vec<SweepRow>,
}

pub fn analyze(cfg: &GameConfig) -> NashOutcome {
    let game = &cfg.game;
    let mut r = Report::new();
    r.push("name", &cfg.name);
    r.push("players", game.players());
    r.num("sigma", game.sigma());
    r.num("p", game.p());
    r.num("theta_mean", game.mean_theta());

    let eq = match nash::solve(game, None) {
        Ok(eq) => eq,
        Err(e) => {
            r.push("error", e);
            r.push("status", "error");
            return NashOutcome { report: r, passed: false, sweep: Vec::new() };
        }
    };
    let tol = nash::tolerance(game, &eq.y_star);
    let mass_weight = eq.mass_weight(game);
    r.push("y_star", fmt_list(&eq.y_star));
    r.num("y_bar", eq.y_bar);
    r.num("residual", eq.residual_norm);
    r.num("residual_tolerance", tol);
    r.push("newton_iterations", eq.iterations);
    r.push("restarted", eq.restarted);
    r.num("jacobian_det", eq.jacobian_det);
    r.push("diagonal", fmt_list(&eq.diagonal));
    r.push("minors", fmt_list(&eq.minors));
    r.push("minors_positive", eq.minors_positive);
    r.num("mass_weight", mass_weight);
    r.push("shift_index", eq.shift_index);

    let mut passed = eq.residual_norm <= tol && eq.minors_positive && mass_weight < 1.0;

    match nash::structure_report(&eq, game) {
        Ok(s) => {
            r.push("monotone", s.monotone);
            r.push("equality_pattern", s.equality_pattern);
            r.push("within_bounds", s.within_bounds);
            r.push("lower_bound", s.lower_bound);
            r.push("shift_consistent", s.shift_consistent);
            passed &= s.passed();
        }
        Err(e) => {
            r.push("structure_error", e);
            passed = false;
        }
    }

    let (lhs, rhs) = nash::momentum_identity(&eq.y_star, game);
    let gap = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    r.num("momentum_lhs", lhs);
    r.num("momentum_rhs", rhs);
    r.num("momentum_gap", gap);
    passed &= gap <= MOMENTUM_TOL;

    if game.is_consensus() {
        let target = game.mean_theta().powf(1.0 / game.p());
        r.push("unique_trivial", eq.y_star.iter().all(|y| (y - target).abs() <= MULTISTART_TOL));
    }

    match nash::multistart(game, cfg.multistart, cfg.seed, MULTISTART_TOL) {
        Ok(m) => {
            r.push("multistart_starts", m.starts);
            r.push("multistart_agreeing", m.agreeing);
            r.push("multistart_restarted", m.restarted);
            r.num("multistart_max_deviation", m.max_deviation);
            passed &= m.agreeing == m.starts;
        }
        Err(e) => {
            r.push("multistart_error", e);
            passed = false;
        }
    }

    match nash::verify_nash(&eq, game, cfg.verify_grid) {
        Ok(check) => {
            r.push("verify_nash", check.verified);
            r.push("profitable_deviations", check.deviations.len());
            passed &= check.verified;
        }
        Err(e) => {
            r.push("verify_nash_error", e);
            passed = false;
        }
    }

    let sweep = match nash::asymptotic_sweep(game, &cfg.sigmas) {
        Ok(rows) => {
            r.push("sweep_monotone", nash::sweep_is_monotone(&rows, 1e-9));
            rows
        }
        Err(e) => {
            r.push("sweep_error", e);
            Vec::new()
        }
    };

    r.push("status", if passed { "pass" } else { "fail" });
    NashOutcome { report: r, passed, sweep }
}

pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut s = String::from("sigma,to_convictions,to_consensus\n");
    for row in rows {
        s.push_str(&format!(
            "{},{},{}\n",
            fmt_sig12(row.sigma),
            fmt_sig12(row.to_convictions),
            fmt_sig12(row.to_consensus)
        ));
    }
    s
}

/// Writes `equilibrium.txt` and `sweep.csv` under `root`.
pub fn run(cfg: &GameConfig, root: &Path) -> io::Result<(NashOutcome, PathBuf)> {
    let outcome = analyze(cfg);
    let dir = root.join(cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.name)));
    std::fs::create_dir_all(&dir)?;
    outcome.report.write(&dir.join("equilibrium.txt"))?;
    std::fs::write(dir.join("sweep.csv"), render_sweep(&outcome.sweep))?;
    Ok((outcome, dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_pair() {
        let cfg = GameConfig::parse("[game]\ntheta = [1.0, 3.0]\nsigma = 1.0\np = 1.0\n[solver]\nmultistart = 20\n", "g")
            .unwrap();
        let out = analyze(&cfg);
        assert!(out.passed, "{}", out.report);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let y: Vec<f64> = out.report.get("y_star").unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert!((y[0] - phi).abs() < 1e-10 && (y[1] - (1.0 + phi)).abs() < 1e-10, "{y:?}");
        assert_eq!(out.sweep.len(), 7);
    }

    #[test]
    fn consensus_flagged_trivial() {
        let cfg = GameConfig::parse("[game]\ntheta = [2.0, 2.0, 2.0]\nsigma = 0.7\n", "c").unwrap();
        let out = analyze(&cfg);
        assert_eq!(out.report.get("unique_trivial"), Some("true"));
    }
}
