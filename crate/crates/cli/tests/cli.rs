use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csflock::config::{GameConfig, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csflock"))
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin().env("CSFLOCK_OUT", out).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const HA: &str = r#"
name = "ha"

[scenario]
kind = "ha"
lambda = 2.0
v0 = 0.9

[params]
sigma = 1.0

[integrator]
dt = 1e-3
t_final = 3.0
record_every = 50
"#;

const SECTORIAL: &str = r#"
name = "sect"
checks = ["theta-conservation", "velocity-bound", "sector-preserved", "grassmann"]

[scenario]
kind = "random-sectorial"
seed = 4
agents = 5
dim = 3
epsilon = 0.3

[params]
sigma = 0.5
kappa = 0.1
kernel = { kind = "smooth-power", lambda = 1.0, beta = 1.0 }

[integrator]
dt = 0.01
t_final = 10.0
record_every = 20
"#;

#[test]
fn shipped_configs_parse() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let ok = if text.contains("[game]") {
            GameConfig::from_path(&path).map(|_| ()).map_err(|e| e.to_string())
        } else {
            RunConfig::from_path(&path).map(|_| ()).map_err(|e| e.to_string())
        };
        assert!(ok.is_ok(), "{}: {:?}", path.display(), ok);
        seen += 1;
    }
    assert!(seen >= 4);
}

#[test]
fn simulate_writes_series_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ha.toml", HA);
    let out = run(tmp.path(), &["simulate", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mut reader = csv::Reader::from_path(tmp.path().join("ha/series.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["t", "A", "B", "D", "R", "gamma", "gamma2d", "margin"]);
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 61);
    // 1-D run: no projected angle, A = 2 v(t)
    assert!(rows.iter().all(|r| r[6].is_nan() && (r[5] - std::f64::consts::PI).abs() < 1e-11));
    let last = rows.last().unwrap();
    assert!((last[0] - 3.0).abs() < 1e-12);
    let scn = csflock_core::scenarios::HaScenario::new(2.0, 1.0, 0.9).unwrap();
    let exact = csflock_core::scenarios::ha_closed_form(&scn, 3.0).unwrap();
    assert!((last[1] - 2.0 * exact).abs() <= 1e-9 * exact);

    let report = csflock::output::Report::parse(&std::fs::read_to_string(tmp.path().join("ha/report.txt")).unwrap());
    assert_eq!(report.get("status"), Some("pass"));
    assert_eq!(report.get("theta_mean_conserved"), Some("true"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SECTORIAL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&a, &["simulate", cfg.to_str().unwrap()]).status.success());
    assert!(run(&b, &["--threads", "1", "simulate", cfg.to_str().unwrap()]).status.success());
    for file in ["series.csv", "report.txt"] {
        let x = std::fs::read(a.join("sect").join(file)).unwrap();
        let y = std::fs::read(b.join("sect").join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
}

#[test]
fn out_flag_overrides_env() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ha.toml", HA);
    let flag = tmp.path().join("flag");
    let out = run(&tmp.path().join("env"), &["--out", flag.to_str().unwrap(), "simulate", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(flag.join("ha/report.txt").exists());
    assert!(!tmp.path().join("env").exists());
}

#[test]
fn config_errors_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    for (text, key) in [
        (HA.replace("sigma = 1.0", ""), "params.sigma"),
        (HA.replace("dt = 1e-3", "dt = -1.0"), "integrator.dt"),
        (HA.replace("v0 = 0.9", "v0 = 0.9\nseed = 3"), "scenario.seed"),
        (HA.replace("record_every = 50", "record_every = 50\nsteps = 4"), "integrator.steps"),
    ] {
        let cfg = write(tmp.path(), "bad.toml", &text);
        let out = run(tmp.path(), &["simulate", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2));
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(key), "expected {key} in {stderr}");
    }
    let out = run(tmp.path(), &["simulate", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_check_sets_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    // isotropic directions: some agent starts with a downward velocity
    let text = SECTORIAL
        .replace("random-sectorial", "random")
        .replace("epsilon = 0.3\n", "")
        .replace("\"sector-preserved\", ", "");
    let ok = write(tmp.path(), "ok.toml", &text);
    assert_eq!(run(tmp.path(), &["simulate", ok.to_str().unwrap()]).status.code(), Some(0));
    let bad = write(tmp.path(), "bad.toml", &text.replace("\"grassmann\"", "\"grassmann\", \"sector-preserved\""));
    assert_eq!(run(tmp.path(), &["simulate", bad.to_str().unwrap()]).status.code(), Some(1));
    let report = std::fs::read_to_string(tmp.path().join("sect/report.txt")).unwrap();
    assert!(report.contains("sector_preserved: false\nstatus: fail\n"), "{report}");
}

#[test]
fn nash_writes_equilibrium_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("golden.toml");
    let out = run(tmp.path(), &["nash", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let eq = csflock::output::Report::parse(&std::fs::read_to_string(tmp.path().join("golden/equilibrium.txt")).unwrap());
    let y: Vec<f64> = eq.get("y_star").unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((y[0] - phi).abs() < 1e-10 && (y[1] - phi * phi).abs() < 1e-10);
    assert_eq!(eq.get("multistart_agreeing"), Some("100"));
    assert_eq!(eq.get("verify_nash"), Some("true"));

    let mut reader = csv::Reader::from_path(tmp.path().join("golden/sweep.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["sigma", "to_convictions", "to_consensus"]);
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 7);
    assert!(rows[6][1] < rows[4][1] && rows[0][2] < rows[2][2]);
}

#[test]
fn sweep_runs_every_value() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SECTORIAL}\n[sweep]\nparameter = \"seed\"\nvalues = [1, 2, 3]\n");
    let cfg = write(tmp.path(), "sw.toml", &text);
    let out = run(tmp.path(), &["sweep", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let mut reader = csv::Reader::from_path(tmp.path().join("sect/sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(&row[0], k.to_string());
        assert_eq!(&row[3], "pass");
        assert!(tmp.path().join("sect").join(&row[8]).join("series.csv").exists());
    }
    let bad = write(tmp.path(), "bad.toml", SECTORIAL);
    assert_eq!(run(tmp.path(), &["sweep", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_suites() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["verify", "asymptotics"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS asymptotics"));
    assert!(tmp.path().join("verify/asymptotics.txt").exists());
    let out = run(tmp.path(), &["verify", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_lists_commands_and_flags() {
    let out = bin().arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for word in ["simulate", "nash", "verify", "sweep", "--out", "CSFLOCK_OUT", "--threads"] {
        assert!(text.contains(word), "{word} missing from help:\n{text}");
    }
}
