//! `simulate` and `sweep`: integrate, fit, check, write.

use std::io;
use std::path::{Path, PathBuf};

use csflock_core::diagnostics::{fit_rate, floor_window, RateFit};
use csflock_core::dynamics::{integrate, Trajectory};
use csflock_core::model::Kernel;
use csflock_core::scenarios::{self, ha_closed_form};
use rayon::prelude::*;

use crate::config::{CheckKind, RunConfig, Scenario};
use crate::output::{fmt_sig12, render_series, Report};

/// Relative drift allowed in the mass-weighted mean of `θ`.
pub const THETA_DRIFT_TOL: f64 = 1e-10;
/// Slack on `γ ≤ γ_2D`.
pub const ANGLE_SLACK: f64 = 1e-9;
/// Allowed growth of the diameter past the first half of the run.
pub const DIAMETER_GROWTH: f64 = 1.05;
/// Slack on `v1(t) ≥ L(0)` for the fat-tail pair.
pub const LYAPUNOV_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub passed: bool,
    pub trajectory: Option<Trajectory>,
}

pub fn kernel_label(k: &Kernel) -> String {
    match *k {
        Kernel::Uniform { level } => format!("uniform(level={level})"),
        Kernel::SmoothPower { lambda, beta } => format!("smooth-power(lambda={lambda},beta={beta})"),
        Kernel::TruncatedExactPower { beta, r0 } => format!("truncated-power(beta={beta},r0={r0})"),
    }
}

/// Runs one configuration in memory.
pub fn analyze(cfg: &RunConfig) -> RunOutcome {
    let mut r = Report::new();
    r.push("name", &cfg.name);
    r.push("scenario", cfg.scenario.name());
    r.push("agents", cfg.state.agents());
    r.push("dim", cfg.state.dim());
    r.num("sigma", cfg.params.sigma);
    r.num("kappa", cfg.params.kappa);
    r.num("p", cfg.params.p);
    r.push("kernel", kernel_label(&cfg.params.kernel));
    r.num("dt", cfg.integrator.dt);
    r.num("t_final", cfg.integrator.t_final);
    r.push("record_every", cfg.integrator.record_every);

    let traj = match integrate(&cfg.state, &cfg.params, &cfg.integrator, &cfg.probes) {
        Ok(t) => t,
        Err(e) => {
            r.push("error", e);
            r.push("status", "error");
            return RunOutcome { report: r, passed: false, trajectory: None };
        }
    };
    r.push("steps_taken", traj.steps_taken);
    r.push("samples", traj.samples.len());
    r.push("terminated_early", traj.terminated_early);
    r.num("speed_bound", traj.speed_bound);
    r.num("t_end", traj.last().t);

    let mean0 = cfg.state.mean_theta();
    let drift = traj.samples.iter().map(|s| (s.state.mean_theta() - mean0).abs()).fold(0.0, f64::max) / mean0;
    let max_speed = traj
        .samples
        .iter()
        .flat_map(|s| (0..s.state.agents()).map(move |i| s.state.speed(i)))
        .fold(0.0, f64::max);
    r.num("theta_mean_initial", mean0);
    r.num("theta_mean_drift", drift);
    r.num("max_speed", max_speed);

    if cfg.probes.frames {
        frame_summary(cfg, &traj, &mut r);
    }
    scenario_summary(cfg, &traj, &mut r);

    let mut passed = !traj.terminated_early;
    for &check in &cfg.checks {
        let ok = evaluate(check, cfg, &traj, drift);
        r.push(check.report_key(), ok);
        passed &= ok;
    }
    r.push("status", if passed { "pass" } else { "fail" });
    RunOutcome { report: r, passed, trajectory: Some(traj) }
}

fn frame_summary(cfg: &RunConfig, traj: &Trajectory, r: &mut Report) {
    let frames: Vec<_> = traj.frames().collect();
    let Some(&(_, last)) = frames.last() else { return };
    r.num("final_A", last.a);
    r.num("final_B", last.b);
    r.num("final_D", last.d);
    r.push("final_gamma", crate::output::fmt_opt(last.gamma));
    r.push("final_gamma2d", crate::output::fmt_opt(last.gamma2d));
    let reverse = frames
        .iter()
        .filter_map(|(_, f)| match (f.gamma, f.gamma2d) {
            (Some(g), Some(g2)) if g > 1e-6 => Some(g2 / g),
            _ => None,
        })
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    r.push("gamma2d_over_gamma_max", crate::output::fmt_opt(reverse));

    let times: Vec<f64> = frames.iter().map(|f| f.0).collect();
    let t_end = *times.last().unwrap_or(&0.0);
    let half = cfg.fit.window.unwrap_or((0.5 * t_end, t_end));
    let a: Vec<f64> = frames.iter().map(|f| f.1.a).collect();
    let b: Vec<f64> = frames.iter().map(|f| f.1.b).collect();
    record_fit(r, "A", fit_rate(&times, &a, half));
    record_fit(r, "B", fit_rate(&times, &b, half));

    if cfg.probes.gamma2d_grid.is_some() && cfg.state.dim() >= 2 {
        let angle = one_minus_cos_series(frames.iter().map(|f| f.1.gamma2d));
        let window = cfg.fit.window.or_else(|| floor_window(&times, &angle, cfg.fit.angle_floor));
        match window {
            Some(w) => record_fit(r, "angle", fit_rate(&times, &angle, w)),
            None => r.push("fit_angle", "no samples above the angle floor"),
        }
    }
}

/// `1 − cos γ = 2 sin²(γ/2)`, accurate for small angles; `NaN` when undefined.
pub fn one_minus_cos_series(gammas: impl Iterator<Item = Option<f64>>) -> Vec<f64> {
    gammas.map(|g| g.map_or(f64::NAN, |g| 2.0 * (0.5 * g).sin().powi(2))).collect()
}

fn record_fit<E: std::fmt::Display>(r: &mut Report, key: &str, fit: Result<RateFit, E>) {
    match fit {
        Ok(f) => {
            r.push(format!("fit_window_{key}"), format!("{},{}", fmt_sig12(f.window.0), fmt_sig12(f.window.1)));
            r.num(format!("rate_{key}"), f.rate);
            r.num(format!("r2_{key}"), f.r_squared);
        }
        Err(e) => {
            r.push(format!("rate_{key}"), "nan");
            r.push(format!("fit_{key}"), e);
        }
    }
}

fn scenario_summary(cfg: &RunConfig, traj: &Trajectory, r: &mut Report) {
    match &cfg.scenario {
        Scenario::Ha(scn) => {
            let mut worst = 0.0f64;
            for s in &traj.samples {
                if let Ok(exact) = ha_closed_form(scn, s.t) {
                    worst = worst.max((s.state.velocity(0)[0] - exact).abs() / exact.abs());
                }
            }
            r.push("ha_regime", format!("{:?}", scn.regime()).to_lowercase());
            r.num("ha_max_rel_error", worst);
        }
        Scenario::FatTail(ft) => {
            let l0 = scenarios::fat_lyapunov(&cfg.state, ft.beta, ft.r0).unwrap_or(f64::NAN);
            let v1_min = traj.samples.iter().map(|s| s.state.velocity(0)[0]).fold(f64::INFINITY, f64::min);
            let x1: Vec<f64> = traj.samples.iter().map(|s| s.state.position(0)[0]).collect();
            r.num("lyapunov_initial", l0);
            r.num("v1_min", v1_min);
            r.push("x1_increasing", x1.windows(2).all(|w| w[1] > w[0]));
        }
        Scenario::RandomSectorial { epsilon, .. } => {
            r.num("epsilon", *epsilon);
            let margin = traj
                .samples
                .iter()
                .flat_map(|s| (0..s.state.agents()).map(move |i| *s.state.velocity(i).last().unwrap_or(&0.0)))
                .fold(f64::INFINITY, f64::min);
            r.num("min_vertical_velocity", margin);
        }
        Scenario::Random { .. } | Scenario::Explicit => {}
    }
}

fn evaluate(check: CheckKind, cfg: &RunConfig, traj: &Trajectory, drift: f64) -> bool {
    match check {
        CheckKind::ThetaConservation => drift <= THETA_DRIFT_TOL,
        CheckKind::VelocityBound => {
            let limit = traj.speed_bound * (1.0 + 1e-9);
            traj.samples.iter().all(|s| (0..s.state.agents()).all(|i| s.state.speed(i) <= limit))
        }
        CheckKind::SectorPreserved => traj
            .samples
            .iter()
            .all(|s| (0..s.state.agents()).all(|i| *s.state.velocity(i).last().unwrap_or(&-1.0) >= 0.0)),
        CheckKind::DiameterBounded => {
            let t_end = traj.last().t;
            let (mut early, mut all) = (0.0f64, 0.0f64);
            for (t, f) in traj.frames() {
                all = all.max(f.d);
                if t <= 0.5 * t_end {
                    early = early.max(f.d);
                }
            }
            cfg.probes.frames && all <= DIAMETER_GROWTH * early
        }
        CheckKind::Misaligned => match &cfg.scenario {
            Scenario::FatTail(ft) => match scenarios::fat_lyapunov(&cfg.state, ft.beta, ft.r0) {
                Ok(l0) => l0 > 0.0 && traj.samples.iter().all(|s| s.state.velocity(0)[0] >= l0 - LYAPUNOV_SLACK),
                Err(_) => false,
            },
            _ => false,
        },
        CheckKind::Grassmann => {
            let mut any = false;
            let ok = traj.frames().all(|(_, f)| match (f.gamma, f.gamma2d) {
                (Some(g), Some(g2)) => {
                    any = true;
                    g <= g2 + ANGLE_SLACK
                }
                _ => true,
            });
            ok && any
        }
    }
}

/// Directory for a run under `root`.
pub fn run_dir(cfg: &RunConfig, root: &Path) -> PathBuf {
    root.join(cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.name)))
}

/// Writes `series.csv` (when frames were recorded) and `report.txt` into `dir`.
pub fn write_outcome(outcome: &RunOutcome, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    if let Some(traj) = &outcome.trajectory {
        if traj.samples.iter().any(|s| s.frame.is_some()) {
            std::fs::write(dir.join("series.csv"), render_series(traj))?;
        }
    }
    outcome.report.write(&dir.join("report.txt"))
}

pub fn simulate(cfg: &RunConfig, root: &Path) -> io::Result<(RunOutcome, PathBuf)> {
    let outcome = analyze(cfg);
    let dir = run_dir(cfg, root);
    write_outcome(&outcome, &dir)?;
    Ok((outcome, dir))
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepLine {
    pub index: usize,
    pub value: f64,
    pub status: String,
    pub rate_a: String,
    pub rate_b: String,
    pub final_a: String,
    pub final_gamma: String,
    pub dir: String,
}

pub const SWEEP_HEADER: &str = "index,parameter,value,status,rate_A,rate_B,final_A,final_gamma,dir";

/// Runs every value of the `[sweep]` table in parallel. Each run gets its
/// own subdirectory; a summary goes to `sweep.csv`.
pub fn sweep(cfg: &RunConfig, root: &Path) -> io::Result<(Vec<SweepLine>, PathBuf)> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "configuration has no [sweep] table"))?;
    let base = run_dir(cfg, root);
    std::fs::create_dir_all(&base)?;
    let name = spec.parameter.name();
    let lines = spec
        .values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| {
            let sub = format!("{index:03}-{name}");
            let dir = base.join(&sub);
            let outcome = match cfg.with_override(spec.parameter, value) {
                Ok(c) => analyze(&c),
                Err(e) => {
                    let mut report = Report::new();
                    report.push("error", e);
                    report.push("status", "error");
                    RunOutcome { report, passed: false, trajectory: None }
                }
            };
            write_outcome(&outcome, &dir)?;
            let get = |k: &str| outcome.report.get(k).unwrap_or("nan").to_string();
            Ok(SweepLine {
                index,
                value,
                status: get("status"),
                rate_a: get("rate_A"),
                rate_b: get("rate_B"),
                final_a: get("final_A"),
                final_gamma: get("final_gamma"),
                dir: sub,
            })
        })
        .collect::<io::Result<Vec<_>>>()?;

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for l in &lines {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            l.index,
            name,
            fmt_sig12(l.value),
            l.status,
            l.rate_a,
            l.rate_b,
            l.final_a,
            l.final_gamma,
            l.dir
        ));
    }
    std::fs::write(base.join("sweep.csv"), csv)?;
    Ok((lines, base))
}
