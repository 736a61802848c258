//! Named verification suites, shared by `csflock verify` and the acceptance
//! test target.

use std::fmt;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use csflock_core::diagnostics::{self, fit_rate, floor_window, DiagnosticsFrame};
use csflock_core::dynamics::{self, integrate, integrate_opinion, IntegratorSpec, Probes, Trajectory};
use csflock_core::model::{self, FlockState, Kernel, SystemParams};
use csflock_core::nash::{self, OpinionGame};
use csflock_core::potential::{self, RescaledState};
use csflock_core::scenarios::{self, FatTail, HaScenario, SpreadKnobs};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::run::one_minus_cos_series;

/// Suite names in run order; `all` runs every one of them.
pub const SUITES: [&str; 11] = [
    "ha",
    "alignment",
    "sectorial",
    "fat-tail",
    "principles",
    "symmetry",
    "grassmann",
    "nash",
    "opinion-flow",
    "asymptotics",
    "jacobian",
];

/// Checks that fail because the property itself does not hold for the
/// model; see the README. `(suite, check)`.
pub const KNOWN_DEFECTS: &[(&str, &str)] = &[("fat-tail", "lyapunov_nonincreasing")];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// True when every failing check is listed in [`KNOWN_DEFECTS`].
    pub fn only_known_defects(&self) -> bool {
        self.failures().all(|c| KNOWN_DEFECTS.contains(&(self.name, c.name.as_str())))
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        writeln!(f, "{verdict} {} ({:.2} s)", self.name, self.elapsed.as_secs_f64())?;
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let known = if !c.passed && KNOWN_DEFECTS.contains(&(self.name, c.name.as_str())) {
                " [known defect]"
            } else {
                ""
            };
            writeln!(f, "  {mark} {}: {}{known}", c.name, c.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownSuite(pub String);

impl fmt::Display for UnknownSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown suite `{}`; expected one of: all, {}", self.0, SUITES.join(", "))
    }
}

impl std::error::Error for UnknownSuite {}

struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.0.push(Check { name: name.into(), passed, detail: detail.into() });
    }
}

/// Runs suites, caching the flock runs that several suites inspect.
#[derive(Default)]
pub struct Verifier {
    sectorial: OnceLock<Result<(Trajectory, Duration), String>>,
    principles: OnceLock<Vec<PrincipleRun>>,
}

impl Verifier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `name` (or every suite for `all`).
    pub fn run(&self, name: &str) -> Result<Vec<SuiteReport>, UnknownSuite> {
        if name == "all" {
            return Ok(SUITES.iter().map(|s| self.run_one(s)).collect());
        }
        let name = SUITES.iter().find(|s| **s == name).ok_or_else(|| UnknownSuite(name.into()))?;
        Ok(vec![self.run_one(name)])
    }

    fn run_one(&self, name: &'static str) -> SuiteReport {
        let start = Instant::now();
        let mut c = Checks(Vec::new());
        match name {
            "ha" => ha(&mut c),
            "alignment" => alignment(&mut c),
            "sectorial" => self.sectorial(&mut c),
            "fat-tail" => fat_tail(&mut c),
            "principles" => self.principles(&mut c),
            "symmetry" => symmetry(&mut c),
            "grassmann" => self.grassmann(&mut c),
            "nash" => nash_suite(&mut c),
            "opinion-flow" => opinion_flow(&mut c),
            "asymptotics" => asymptotics(&mut c),
            "jacobian" => jacobian(&mut c),
            _ => unreachable!("suite list and dispatch agree"),
        }
        SuiteReport { name, checks: c.0, elapsed: start.elapsed() }
    }

    fn sectorial_run(&self) -> &Result<(Trajectory, Duration), String> {
        self.sectorial.get_or_init(|| {
            let (state, params) = sectorial_config();
            let spec = IntegratorSpec { dt: 0.01, t_final: SECTORIAL_T, record_every: 10 };
            let start = Instant::now();
            integrate(&state, &params, &spec, &Probes::all(diagnostics::default_grid(3)))
                .map(|t| (t, start.elapsed()))
                .map_err(|e| e.to_string())
        })
    }

    fn principle_runs(&self) -> &[PrincipleRun] {
        self.principles.get_or_init(|| (0..PRINCIPLE_RUNS).into_par_iter().map(principle_run).collect())
    }
}

fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn ha(c: &mut Checks) {
    let start = Instant::now();
    for lambda in [0.5, 1.0, 2.0] {
        let scn = HaScenario::new(lambda, 1.0, 0.9).expect("valid scenario");
        let (state, params) = scenarios::ha_flock_config(&scn);
        let spec = IntegratorSpec { dt: 1e-4, t_final: 5.0, record_every: 10 };
        let name = format!("lambda_{lambda}");
        match integrate(&state, &params, &spec, &Probes::none()) {
            Ok(traj) => {
                let worst = traj
                    .samples
                    .iter()
                    .map(|s| {
                        let exact = scenarios::ha_closed_form(&scn, s.t).expect("t >= 0");
                        (s.state.velocity(0)[0] - exact).abs() / exact
                    })
                    .fold(0.0, f64::max);
                let reached = (traj.last().t - 5.0).abs() < 1e-9;
                c.add(&name, worst <= 1e-6 && reached, format!("max relative error {} up to t = 5", sci(worst)));
            }
            Err(e) => c.add(&name, false, e.to_string()),
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    c.add("runtime", elapsed < 5.0, format!("{elapsed:.2} s for all three runs (limit 5 s)"));
}

fn alignment(c: &mut Checks) {
    for seed in 1..=5u64 {
        let state = scenarios::random_state(seed, 6, 3, &SpreadKnobs::default()).expect("valid knobs");
        let theta_bar = state.mean_theta();
        // total mass 1 and level 5 give M·φ* = 5, so σθ̄ = 4.5 leaves a gap of 0.5.
        let params = SystemParams { sigma: 4.5 / theta_bar, kappa: 0.1, p: 2.0, kernel: Kernel::Uniform { level: 5.0 } };
        let gap = state.total_mass() * params.kernel.infimum() - params.sigma * theta_bar;
        let spec = IntegratorSpec { dt: 0.01, t_final: 40.0, record_every: 10 };
        let traj = match integrate(&state, &params, &spec, &Probes { frames: true, gamma2d_grid: None }) {
            Ok(t) => t,
            Err(e) => {
                c.add(&format!("seed_{seed}"), false, e.to_string());
                continue;
            }
        };
        let (times, a): (Vec<f64>, Vec<f64>) = traj.frames().map(|(t, f)| (t, f.a)).unzip();
        let fit = fit_rate(&times, &a, (20.0, 40.0));
        let last = &traj.last().state;
        let target = last.mean_theta().sqrt();
        let speed_dev = (0..last.agents()).map(|i| (last.speed(i) - target).abs()).fold(0.0, f64::max);
        c.add(&format!("seed_{seed}_gap"), (gap - 0.5).abs() < 1e-12, format!("M·φ* − σθ̄ = {gap:.6}"));
        match fit {
            Ok(f) => c.add(
                &format!("seed_{seed}_rate"),
                f.rate <= -0.45 && f.r_squared >= 0.99,
                format!("rate {:.4}, r² {:.6} on [20, 40]", f.rate, f.r_squared),
            ),
            Err(e) => c.add(&format!("seed_{seed}_rate"), false, e.to_string()),
        }
        // framewise sanity: A may not grow beyond round-off
        let rises = a.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-6)).count();
        c.add(&format!("seed_{seed}_A_monotone"), rises == 0, format!("{rises} frames with A rising"));
        c.add(
            &format!("seed_{seed}_speeds"),
            speed_dev <= 1e-4,
            format!("max_i ||v_i| − θ̄^(1/2)| = {}", sci(speed_dev)),
        );
    }
}

const SECTORIAL_T: f64 = 200.0;

fn sectorial_config() -> (FlockState, SystemParams) {
    let state = scenarios::random_sectorial(1, 8, 3, 0.2, &SpreadKnobs::default()).expect("valid knobs");
    let params = SystemParams { sigma: 0.5, kappa: 0.2, p: 2.0, kernel: Kernel::SmoothPower { lambda: 1.0, beta: 1.0 } };
    (state, params)
}

fn sectorial_kernel_at(r: f64) -> Result<f64, model::ModelError> {
    sectorial_config().1.kernel.eval(r)
}

fn mean_velocity(state: &FlockState) -> Vec<f64> {
    let n = state.dim();
    let mut v = vec![0.0; n];
    for i in 0..state.agents() {
        for (acc, x) in v.iter_mut().zip(state.velocity(i)) {
            *acc += state.mass[i] * x;
        }
    }
    let total = state.total_mass();
    v.iter().map(|x| x / total).collect()
}

impl Verifier {
    fn sectorial(&self, c: &mut Checks) {
        let (traj, elapsed) = match self.sectorial_run() {
            Ok(r) => r,
            Err(e) => return c.add("integrate", false, e.clone()),
        };
        let frames: Vec<(f64, DiagnosticsFrame)> = traj.frames().map(|(t, f)| (t, *f)).collect();
        let times: Vec<f64> = frames.iter().map(|f| f.0).collect();
        let half = (0.5 * SECTORIAL_T, SECTORIAL_T);
        let a: Vec<f64> = frames.iter().map(|f| f.1.a).collect();
        let b: Vec<f64> = frames.iter().map(|f| f.1.b).collect();
        let angle = one_minus_cos_series(frames.iter().map(|f| f.1.gamma2d));
        let angle_window = floor_window(&times, &angle, crate::config::DEFAULT_ANGLE_FLOOR);
        for (name, series, window) in [("rate_A", &a, Some(half)), ("rate_B", &b, Some(half)), ("rate_angle", &angle, angle_window)] {
            let Some(window) = window else {
                c.add(name, false, "no samples above the angle floor");
                continue;
            };
            match fit_rate(&times, series, window) {
                Ok(f) => c.add(
                    name,
                    f.rate < 0.0 && f.r_squared >= 0.98,
                    format!("rate {:.5}, r² {:.6} on [{:.1}, {:.1}]", f.rate, f.r_squared, window.0, window.1),
                ),
                Err(e) => c.add(name, false, e.to_string()),
            }
        }

        let d_all = frames.iter().map(|f| f.1.d).fold(0.0, f64::max);
        let d_early = frames.iter().filter(|f| f.0 <= 0.5 * SECTORIAL_T).map(|f| f.1.d).fold(0.0, f64::max);
        c.add(
            "diameter_bounded",
            d_all <= 1.05 * d_early,
            format!("sup D = {d_all:.6}, first-half max {d_early:.6}, ratio {:.6}", d_all / d_early),
        );

        // monitored only: how far the planar angle overshoots the true one,
        // and the angle rate measured against M·φ(sup D)
        let reverse = frames
            .iter()
            .filter_map(|f| match (f.1.gamma, f.1.gamma2d) {
                (Some(g), Some(g2)) if g > 1e-6 => Some(g2 / g),
                _ => None,
            })
            .fold(f64::NAN, f64::max);
        c.add("reverse_angle_ratio", true, format!("max γ2D/γ = {reverse:.6} over frames with γ > 1e-6 (monitored)"));
        if let (Some(window), Ok(kernel_at_d)) = (angle_window, sectorial_kernel_at(d_all)) {
            if let Ok(f) = fit_rate(&times, &angle, window) {
                let scale = traj.last().state.total_mass() * kernel_at_d;
                c.add(
                    "angle_rate_scale",
                    true,
                    format!("rate / (M·φ(sup D)) = {:.5} (monitored)", f.rate / scale),
                );
            }
        }

        let last = &traj.last().state;
        let a_ratio = a.last().copied().unwrap_or(f64::NAN) / a[0];
        let gap = (model::norm(&mean_velocity(last)) - last.mean_theta().sqrt()).abs();
        c.add(
            "common_velocity",
            gap <= 1e-3 && a_ratio <= 1e-2,
            format!("A(T)/A(0) = {}, ||v̄| − θ̄^(1/2)| = {}", sci(a_ratio), sci(gap)),
        );
        let secs = elapsed.as_secs_f64();
        c.add("runtime", secs < 30.0, format!("{secs:.2} s (limit 30 s)"));
    }
}

fn fat_tail(c: &mut Checks) {
    let ft = FatTail::new(1.5, 0.01, 10.0, 0.9);
    c.add(
        "preconditions",
        ft.check().is_ok(),
        match ft.check() {
            Ok(()) => format!("beta {}, r0 {}, x1 {}, v1 {}, v2 {}", ft.beta, ft.r0, ft.x1, ft.v1, ft.v2),
            Err(e) => e.to_string(),
        },
    );
    let Ok((state, params)) = scenarios::fat_tail_config(&ft) else { return };
    let spec = IntegratorSpec { dt: 1e-3, t_final: 100.0, record_every: 1 };
    let traj = match integrate(&state, &params, &spec, &Probes::none()) {
        Ok(t) => t,
        Err(e) => return c.add("integrate", false, e.to_string()),
    };
    let bound = ft.v1 + ft.x1.powf(1.0 - ft.beta) / (1.0 - ft.beta);
    let v1_min = traj.samples.iter().map(|s| s.state.velocity(0)[0]).fold(f64::INFINITY, f64::min);
    c.add(
        "misaligned",
        traj.samples.iter().all(|s| s.state.velocity(0)[0] >= bound - 1e-6),
        format!("min v1 = {v1_min:.6} against v1(0) + x1(0)^(1-β)/(1-β) = {bound:.6}"),
    );

    let lyap: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| scenarios::fat_lyapunov(&s.state, ft.beta, ft.r0).unwrap_or(f64::NAN))
        .collect();
    let increases = lyap.windows(2).filter(|w| !(w[1] - w[0] <= 1e-8)).count();
    let largest = lyap.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    c.add(
        "lyapunov_nonincreasing",
        increases == 0,
        format!(
            "{increases} of {} steps increase L by more than 1e-8 (largest {}); L goes {:.6} -> {:.6}",
            lyap.len() - 1,
            sci(largest),
            lyap[0],
            lyap[lyap.len() - 1]
        ),
    );
    let x1: Vec<f64> = traj.samples.iter().map(|s| s.state.position(0)[0]).collect();
    c.add(
        "x1_increasing",
        x1.windows(2).all(|w| w[1] > w[0]) && (traj.last().t - 100.0).abs() < 1e-9,
        format!("x1 goes {:.4} -> {:.4} over {} steps", x1[0], x1[x1.len() - 1], x1.len() - 1),
    );
}

const PRINCIPLE_RUNS: u64 = 200;

struct PrincipleRun {
    seed: u64,
    result: Result<PrincipleStats, String>,
}

struct PrincipleStats {
    kappa: f64,
    min_vertical: f64,
    min_speed: f64,
    floor: f64,
    frames: Vec<DiagnosticsFrame>,
}

fn principle_run(k: u64) -> PrincipleRun {
    let seed = 1000 + k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let epsilon = rng.random_range(0.1..0.9);
    let kappa = if k.is_multiple_of(2) { 0.0 } else { 0.1 };
    let result = (|| {
        let state = scenarios::random_sectorial(seed, 5, 3, epsilon, &SpreadKnobs::default()).map_err(|e| e.to_string())?;
        let params = SystemParams { sigma: 0.5, kappa, p: 2.0, kernel: Kernel::SmoothPower { lambda: 1.0, beta: 1.0 } };
        let spec = IntegratorSpec { dt: 0.01, t_final: 20.0, record_every: 10 };
        let traj = integrate(&state, &params, &spec, &Probes::all(diagnostics::default_grid(3))).map_err(|e| e.to_string())?;
        let vertical0 = (0..state.agents()).map(|i| state.velocity(i)[2]).fold(f64::INFINITY, f64::min);
        let theta_min = state.theta.iter().copied().fold(f64::INFINITY, f64::min);
        let floor = vertical0.min(epsilon * theta_min.powf(1.0 / params.p));
        let (mut min_vertical, mut min_speed) = (f64::INFINITY, f64::INFINITY);
        for s in &traj.samples {
            for i in 0..s.state.agents() {
                min_vertical = min_vertical.min(s.state.velocity(i)[2]);
                min_speed = min_speed.min(s.state.speed(i));
            }
        }
        let frames = traj.frames().map(|(_, f)| *f).collect();
        Ok(PrincipleStats { kappa, min_vertical, min_speed, floor, frames })
    })();
    PrincipleRun { seed, result }
}

impl Verifier {
    fn principles(&self, c: &mut Checks) {
        let runs = self.principle_runs();
        let mut errors = Vec::new();
        let (mut sign_bad, mut speed_bad) = (Vec::new(), Vec::new());
        let (mut worst_vertical, mut worst_slack) = (f64::INFINITY, f64::INFINITY);
        let mut coupled = 0;
        for run in runs {
            match &run.result {
                Ok(s) => {
                    coupled += usize::from(s.kappa > 0.0);
                    worst_vertical = worst_vertical.min(s.min_vertical);
                    worst_slack = worst_slack.min(s.min_speed - s.floor);
                    if s.min_vertical < 0.0 {
                        sign_bad.push(run.seed);
                    }
                    if !(s.floor > 0.0 && s.min_speed >= s.floor - 1e-9) {
                        speed_bad.push(run.seed);
                    }
                }
                Err(e) => errors.push(format!("seed {}: {e}", run.seed)),
            }
        }
        c.add("integrate", errors.is_empty(), format!("{} runs, {coupled} with κ = 0.1; errors: {errors:?}", runs.len()));
        c.add(
            "vertical_nonnegative",
            sign_bad.is_empty(),
            format!("min over runs and frames of min_i v_iⁿ = {worst_vertical:.6}; failing seeds {sign_bad:?}"),
        );
        c.add(
            "speed_floor",
            speed_bad.is_empty(),
            format!("min over runs of min_i |v_i| − c0 = {worst_slack:.6}; failing seeds {speed_bad:?}"),
        );
    }
}

fn symmetry_config(seed: u64) -> (FlockState, SystemParams) {
    let knobs = SpreadKnobs { mass_range: Some((0.5, 1.5)), ..SpreadKnobs::default() };
    let state = scenarios::random_state(seed, 5, 3, &knobs).expect("valid knobs");
    let params = SystemParams { sigma: 1.0, kappa: 0.1, p: 2.0, kernel: Kernel::SmoothPower { lambda: 1.0, beta: 1.0 } };
    (state, params)
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut q = a.qr().q();
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

fn transform(state: &FlockState, q: &DMatrix<f64>) -> FlockState {
    let n = state.dim();
    let apply = |buf: &[f64]| -> Vec<f64> {
        buf.chunks(n).flat_map(|row| (q * nalgebra::DVector::from_column_slice(row)).iter().copied().collect::<Vec<_>>()).collect()
    };
    FlockState::new(n, apply(&state.positions), apply(&state.velocities), state.theta.clone(), state.mass.clone())
        .expect("shape preserved")
}

fn symmetry(c: &mut Checks) {
    let spec = IntegratorSpec { dt: 0.01, t_final: 10.0, record_every: 100 };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mirror = DMatrix::<f64>::identity(3, 3);
    mirror[(0, 0)] = -1.0;
    let (mut drift, mut mirror_err, mut rot_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for seed in 1..=5u64 {
        let (state, params) = symmetry_config(seed);
        let base = match integrate(&state, &params, &spec, &Probes::none()) {
            Ok(t) => t,
            Err(e) => {
                failures.push(e.to_string());
                continue;
            }
        };
        let mean0 = state.mean_theta();
        for s in &base.samples {
            drift = drift.max((s.state.mean_theta() - mean0).abs() / mean0);
        }
        let rotation = random_orthogonal(&mut rng, 3);
        for (q, err) in [(&mirror, &mut mirror_err), (&rotation, &mut rot_err)] {
            match integrate(&transform(&state, q), &params, &spec, &Probes::none()) {
                Ok(moved) => {
                    for (a, b) in base.samples.iter().zip(&moved.samples) {
                        let expect = transform(&a.state, q);
                        let scale = 1.0 + expect.positions.iter().chain(&expect.velocities).fold(0.0f64, |m, x| m.max(x.abs()));
                        let e = max_abs_diff(&expect.positions, &b.state.positions)
                            .max(max_abs_diff(&expect.velocities, &b.state.velocities))
                            .max(max_abs_diff(&a.state.theta, &b.state.theta));
                        *err = err.max(e / scale);
                    }
                }
                Err(e) => failures.push(e.to_string()),
            }
        }
    }
    c.add("integrate", failures.is_empty(), format!("5 runs with N = 5, n = 3, κ = 0.1; errors {failures:?}"));
    c.add("theta_mean_conserved", drift <= 1e-10, format!("max relative drift of θ̄ = {}", sci(drift)));
    c.add("mirror_invariance", mirror_err <= 1e-10, format!("max scaled deviation {}", sci(mirror_err)));
    c.add("rotation_invariance", rot_err <= 1e-10, format!("max scaled deviation {}", sci(rot_err)));
}

fn angle_violations<'a>(frames: impl Iterator<Item = &'a DiagnosticsFrame>) -> (usize, usize, f64) {
    let (mut checked, mut bad, mut worst) = (0, 0, f64::NEG_INFINITY);
    for f in frames {
        if let (Some(g), Some(g2)) = (f.gamma, f.gamma2d) {
            checked += 1;
            worst = worst.max(g - g2);
            if g > g2 + 1e-9 {
                bad += 1;
            }
        }
    }
    (checked, bad, worst)
}

impl Verifier {
    fn grassmann(&self, c: &mut Checks) {
        match self.sectorial_run() {
            Ok((traj, _)) => {
                let (checked, bad, worst) = angle_violations(traj.frames().map(|(_, f)| f));
                c.add(
                    "sectorial_run",
                    bad == 0 && checked > 0,
                    format!("{checked} frames, {bad} with γ > γ2D + 1e-9; max γ − γ2D = {}", sci(worst)),
                );
            }
            Err(e) => c.add("sectorial_run", false, e.clone()),
        }
        let runs = self.principle_runs();
        let frames: Vec<&DiagnosticsFrame> =
            runs.iter().filter_map(|r| r.result.as_ref().ok()).flat_map(|s| s.frames.iter()).collect();
        let (checked, bad, worst) = angle_violations(frames.into_iter());
        let ok_runs = runs.iter().filter(|r| r.result.is_ok()).count();
        c.add(
            "principle_runs",
            bad == 0 && checked > 0 && ok_runs == runs.len(),
            format!("{checked} frames over {ok_runs} runs, {bad} violations; max γ − γ2D = {}", sci(worst)),
        );
    }
}

fn random_game(rng: &mut ChaCha8Rng, n: usize) -> OpinionGame {
    let theta = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
    let mass = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    OpinionGame::new(theta, mass, rng.random_range(0.2..5.0), rng.random_range(0.5..3.0)).expect("positive draws")
}

/// Certificates every equilibrium must carry; `None` when all hold.
fn certificate_failure(eq: &nash::Equilibrium, game: &OpinionGame) -> Option<String> {
    let (lhs, rhs) = nash::momentum_identity(&eq.y_star, game);
    let momentum = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());
    let mut why = Vec::new();
    if !(eq.jacobian_det > 0.0) {
        why.push(format!("det {}", eq.jacobian_det));
    }
    if !eq.minors.iter().all(|m| *m > 0.0) {
        why.push(format!("minors {:?}", eq.minors));
    }
    if !eq.diagonal.iter().all(|d| *d > 0.0) {
        why.push(format!("d {:?}", eq.diagonal));
    }
    if !(eq.mass_weight(game) < 1.0) {
        why.push(format!("Σm/d = {}", eq.mass_weight(game)));
    }
    if !(momentum <= 1e-10) {
        why.push(format!("momentum gap {}", sci(momentum)));
    }
    (!why.is_empty()).then(|| why.join(", "))
}

fn nash_suite(c: &mut Checks) {
    let golden = OpinionGame::new(vec![1.0, 3.0], vec![1.0, 1.0], 1.0, 1.0).expect("valid game");
    let sqrt5 = 5f64.sqrt();
    let expected = [(1.0 + sqrt5) / 2.0, (3.0 + sqrt5) / 2.0];
    let mut certified = Vec::new();
    match nash::solve(&golden, None) {
        Ok(eq) => {
            let err = max_abs_diff(&eq.y_star, &expected);
            c.add("golden_ratio", err <= 1e-10, format!("y* = {:?}, error {}", eq.y_star, sci(err)));
            certified.push(("golden".to_string(), eq, golden.clone()));
        }
        Err(e) => c.add("golden_ratio", false, e.to_string()),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_consensus = 0.0f64;
    let mut consensus_fail = Vec::new();
    for k in 0..10 {
        let n = rng.random_range(1..=8);
        let theta = rng.random_range(0.2..3.0);
        let mass = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let game = OpinionGame::new(vec![theta; n], mass, rng.random_range(0.2..5.0), rng.random_range(0.5..3.0))
            .expect("valid game");
        let target = theta.powf(1.0 / game.p());
        match nash::solve(&game, None) {
            Ok(eq) => {
                let err = eq.y_star.iter().map(|y| (y - target).abs() / target).fold(0.0, f64::max);
                worst_consensus = worst_consensus.max(err);
                if err > 4.0 * f64::EPSILON {
                    consensus_fail.push(k);
                }
                certified.push((format!("consensus {k}"), eq, game));
            }
            Err(_) => consensus_fail.push(k),
        }
    }
    c.add(
        "consensus_exact",
        consensus_fail.is_empty(),
        format!("10 games, max relative error {}; failing {consensus_fail:?}", sci(worst_consensus)),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let games: Vec<OpinionGame> = (0..20).map(|_| {
        let n = rng.random_range(2..=8);
        random_game(&mut rng, n)
    }).collect();
    let results: Vec<_> = games.par_iter().enumerate().map(|(k, g)| (k, nash::multistart(g, 100, k as u64, 1e-8))).collect();
    let mut bad = Vec::new();
    let (mut worst, mut restarted) = (0.0f64, 0usize);
    for (k, res) in &results {
        match res {
            Ok(m) => {
                worst = worst.max(m.max_deviation);
                restarted += m.restarted;
                if m.agreeing != m.starts {
                    bad.push(*k);
                }
            }
            Err(_) => bad.push(*k),
        }
    }
    c.add(
        "multistart",
        bad.is_empty(),
        format!("20 games × 100 starts, max deviation {}, {restarted} aggregate restarts; failing games {bad:?}", sci(worst)),
    );
    for (k, g) in games.iter().enumerate() {
        match nash::solve(g, None) {
            Ok(eq) => certified.push((format!("random {k}"), eq, g.clone())),
            Err(e) => c.add(&format!("solve_random_{k}"), false, e.to_string()),
        }
    }
    let failures: Vec<String> = certified
        .iter()
        .filter_map(|(name, eq, g)| certificate_failure(eq, g).map(|why| format!("{name}: {why}")))
        .collect();
    c.add(
        "certificates",
        failures.is_empty(),
        format!("{} equilibria checked for det, minors, d_i, Σm/d and momentum; {failures:?}", certified.len()),
    );
}

fn opinion_flow(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let game = random_game(&mut rng, 5);
    let eq = match nash::solve(&game, None) {
        Ok(eq) => eq,
        Err(e) => return c.add("solve", false, e.to_string()),
    };
    let starts: Vec<Vec<f64>> = (0..50).map(|_| (0..5).map(|_| rng.random_range(0.05..3.0)).collect()).collect();
    let results: Vec<Result<(f64, f64, bool, f64), String>> = starts
        .par_iter()
        .map(|y0| {
            // keep dt inside the RK4 stability region for this game and start
            let ymax = y0.iter().copied().fold(game.opinion_bounds().1, f64::max);
            let stiff = game.total_mass() + game.sigma() * (game.theta_max() + (game.p() + 1.0) * ymax.powf(game.p()));
            let dt = (1.0 / stiff).min(0.01);
            let spec = IntegratorSpec { dt, t_final: 5000.0, record_every: 10 };
            let mut grad_norm = f64::INFINITY;
            let run = integrate_opinion(y0, &game, &spec, |_, y| {
                let z = RescaledState::from_opinions(y, &game).map(|s| s.z);
                grad_norm = z.and_then(|z| potential::gradient(&z, &game)).map_or(f64::INFINITY, |g| model::norm(&g));
                grad_norm < 1e-10
            })
            .map_err(|e| e.to_string())?;
            let zs: Vec<Vec<f64>> = run
                .iter()
                .map(|(_, y)| RescaledState::from_opinions(y, &game).map(|s| s.z))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let descent = potential::descent_monitor(&zs, &game).map_err(|e| e.to_string())?;
            let end = &run.last().expect("initial sample").1;
            Ok((max_abs_diff(end, &eq.y_star), descent.final_gradient_norm, descent.monotone, run.last().unwrap().0))
        })
        .collect();
    let mut errors = Vec::new();
    let (mut worst_dist, mut worst_grad, mut non_monotone, mut t_max) = (0.0f64, 0.0f64, 0, 0.0f64);
    for r in &results {
        match r {
            Ok((dist, grad, mono, t)) => {
                worst_dist = worst_dist.max(*dist);
                worst_grad = worst_grad.max(*grad);
                non_monotone += usize::from(!mono);
                t_max = t_max.max(*t);
            }
            Err(e) => errors.push(e.clone()),
        }
    }
    c.add("integrate", errors.is_empty(), format!("50 starts, latest stop at t = {t_max:.1}; errors {errors:?}"));
    c.add("gradient_small", worst_grad < 1e-10, format!("max final |∇Φ| = {}", sci(worst_grad)));
    c.add("endpoint", worst_dist <= 1e-6, format!("max distance to the Newton solution {}", sci(worst_dist)));
    c.add("potential_monotone", non_monotone == 0, format!("{non_monotone} runs with Φ increasing"));
    perturbed_flow(c);
}

/// Speeds of a full flock (uniform kernel, frozen θ) follow the opinion flow
/// up to an alignment defect that dies out, so they end at the equilibrium.
fn perturbed_flow(c: &mut Checks) {
    let state = scenarios::random_sectorial(9, 5, 3, 0.3, &SpreadKnobs::default()).expect("valid knobs");
    let params = SystemParams { sigma: 0.8, kappa: 0.0, p: 2.0, kernel: Kernel::Uniform { level: 1.0 } };
    let game = OpinionGame::new(state.theta.clone(), state.mass.clone(), params.sigma, params.p).expect("valid game");
    let spec = IntegratorSpec { dt: 0.01, t_final: 60.0, record_every: 20 };
    let result = (|| -> Result<(f64, f64, f64), String> {
        let eq = nash::solve(&game, None).map_err(|e| e.to_string())?;
        let traj = integrate(&state, &params, &spec, &Probes::none()).map_err(|e| e.to_string())?;
        let mut zs = Vec::with_capacity(traj.samples.len());
        let mut defect_late = 0.0f64;
        for s in &traj.samples {
            let y: Vec<f64> = (0..s.state.agents()).map(|i| s.state.speed(i)).collect();
            zs.push(RescaledState::from_opinions(&y, &game).map_err(|e| e.to_string())?.z);
            if s.t >= 0.5 * spec.t_final {
                let d = dynamics::opinion_defect(&s.state, &params).map_err(|e| e.to_string())?;
                defect_late = d.iter().fold(defect_late, |m, x| m.max(x.abs()));
            }
        }
        let descent = potential::descent_monitor(&zs, &game).map_err(|e| e.to_string())?;
        let z_star = RescaledState::from_opinions(&eq.y_star, &game).map_err(|e| e.to_string())?.z;
        let dist = model::distance(zs.last().expect("initial sample"), &z_star);
        Ok((dist, descent.final_gradient_norm, defect_late))
    })();
    match result {
        Ok((dist, grad, defect)) => c.add(
            "perturbed_endpoint",
            dist <= 1e-4,
            format!("|z(T) − z*| = {}, final |∇Φ| = {}, defect on [T/2, T] ≤ {}", sci(dist), sci(grad), sci(defect)),
        ),
        Err(e) => c.add("perturbed_endpoint", false, e),
    }
}

fn asymptotics(c: &mut Checks) {
    let game = OpinionGame::new(vec![0.5, 1.0, 1.5, 2.5], vec![0.1, 0.2, 0.3, 0.4], 1.0, 2.0).expect("valid game");
    match nash::asymptotic_sweep(&game, &[1e-3, 1e-1, 1e1, 1e3]) {
        Ok(rows) => {
            let conv = rows[3].to_convictions / rows[2].to_convictions;
            let cons = rows[0].to_consensus / rows[1].to_consensus;
            c.add(
                "large_sigma",
                conv < 0.1,
                format!("|y* − θ^(1/p)| = {} at σ = 1e3 vs {} at σ = 10 (ratio {conv:.4})", sci(rows[3].to_convictions), sci(rows[2].to_convictions)),
            );
            c.add(
                "small_sigma",
                cons < 0.1,
                format!("|y* − θ̄^(1/p)| = {} at σ = 1e-3 vs {} at σ = 0.1 (ratio {cons:.4})", sci(rows[0].to_consensus), sci(rows[1].to_consensus)),
            );
        }
        Err(e) => c.add("sweep", false, e.to_string()),
    }
}

fn jacobian(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut det_err, mut grad_err) = (0.0f64, 0.0f64);
    let mut dense_used = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let game = random_game(&mut rng, n);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let closed = nash::jacobian_det(&y, &game).expect("positive opinions");
        dense_used += usize::from(!closed.closed_form);
        let jac = nash::jacobian(&y, &game).expect("positive opinions");
        let dense = DMatrix::from_fn(n, n, |i, j| jac[(i, j)]).determinant();
        det_err = det_err.max((closed.value - dense).abs() / closed.value.abs().max(dense.abs()));

        let z = RescaledState::from_opinions(&y, &game).expect("positive opinions").z;
        let grad = potential::gradient(&z, &game).expect("positive");
        let fd: Vec<f64> = (0..n)
            .map(|i| {
                let h = 1e-5 * z[i];
                let (mut zp, mut zm) = (z.clone(), z.clone());
                zp[i] += h;
                zm[i] -= h;
                (potential::potential(&zp, &game).unwrap() - potential::potential(&zm, &game).unwrap()) / (2.0 * h)
            })
            .collect();
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if scale > 0.0 {
            grad_err = grad_err.max(max_abs_diff(&fd, &grad) / scale);
        }
    }
    c.add(
        "determinant",
        det_err <= 1e-10,
        format!("100 cases, max relative gap closed form vs LU {}; dense fallback {dense_used} times", sci(det_err)),
    );
    c.add("gradient", grad_err <= 1e-6, format!("max |fd − ∇Φ|∞ / |∇Φ|∞ = {}", sci(grad_err)));
}
