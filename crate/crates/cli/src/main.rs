use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csflock::config::{GameConfig, RunConfig};
use csflock::suites::Verifier;
use csflock::{nash_cmd, run};

/// Flocking simulations, opinion-game equilibria and verification suites.
#[derive(Parser)]
#[command(name = "csflock", version, about)]
struct Cli {
    /// Root directory for all outputs.
    #[arg(long, global = true, env = "CSFLOCK_OUT", default_value = ".")]
    out: PathBuf,

    /// Threads for `sweep` and the parallel suites (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one flock and write series.csv and report.txt.
    Simulate {
        /// TOML run configuration.
        config: PathBuf,
    },
    /// Solve an opinion game and write equilibrium.txt and sweep.csv.
    Nash {
        /// TOML game configuration.
        config: PathBuf,
    },
    /// Run a named verification suite (`all` runs every suite).
    Verify {
        /// One of: all, ha, alignment, sectorial, fat-tail, principles,
        /// symmetry, grassmann, nash, opinion-flow, asymptotics, jacobian.
        suite: String,
    },
    /// Run the `[sweep]` table of a run configuration in parallel.
    Sweep {
        /// TOML run configuration with a [sweep] table.
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // only fails if a pool exists already, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, String> {
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = RunConfig::from_path(config).map_err(|e| e.to_string())?;
            let (outcome, dir) = run::simulate(&cfg, &cli.out).map_err(|e| e.to_string())?;
            println!("{}: {} ({})", cfg.name, outcome.report.get("status").unwrap_or("?"), dir.display());
            Ok(outcome.passed)
        }
        Command::Nash { config } => {
            let cfg = GameConfig::from_path(config).map_err(|e| e.to_string())?;
            let (outcome, dir) = nash_cmd::run(&cfg, &cli.out).map_err(|e| e.to_string())?;
            println!("{}: {} ({})", cfg.name, outcome.report.get("status").unwrap_or("?"), dir.display());
            Ok(outcome.passed)
        }
        Command::Sweep { config } => {
            let cfg = RunConfig::from_path(config).map_err(|e| e.to_string())?;
            let (lines, dir) = run::sweep(&cfg, &cli.out).map_err(|e| e.to_string())?;
            let passed = lines.iter().filter(|l| l.status == "pass").count();
            println!("{}: {passed}/{} runs pass ({})", cfg.name, lines.len(), dir.display());
            Ok(passed == lines.len())
        }
        Command::Verify { suite } => {
            let reports = Verifier::new().run(suite).map_err(|e| e.to_string())?;
            let dir = cli.out.join("verify");
            std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            let mut text = String::new();
            for r in &reports {
                print!("{r}");
                text.push_str(&r.to_string());
            }
            std::fs::write(dir.join(format!("{suite}.txt")), text).map_err(|e| e.to_string())?;
            Ok(reports.iter().all(|r| r.passed()))
        }
    }
}
