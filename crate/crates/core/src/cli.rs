//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::dtmc;
use crate::fpe::{residual_curve, solve};
use crate::model::{OccupancyState, Scenario};
use crate::ode::{integrate, Controls, MeanField};
use crate::repro::{self, default_horizon, ReproOptions, DEFAULT_SLOTS, DEFAULT_WINDOW, FULL_SLOTS};
use crate::stability::{classify_equilibria, detect_limit_cycle};
use crate::throughput::{fit_multiplier, omega, optimal_qbar, rate_profile, ThroughputParams};

#[derive(Debug, Parser)]
#[command(name = "macfield", version, about = "Mean-field and exact-chain analysis of slotted backoff")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Scenario JSON file.
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_name = "U64", default_value_t = 1)]
    pub seed: u64,
    /// Simulated slots.
    #[arg(long, value_name = "N")]
    pub slots: Option<u64>,
    /// Statistics window, in slots.
    #[arg(long, value_name = "W", default_value_t = DEFAULT_WINDOW)]
    pub window: u64,
    /// ODE horizon in the scenario's time unit.
    #[arg(long, value_name = "T")]
    pub horizon: Option<f64>,
    /// Simulate the full 1.2e8 slots.
    #[arg(long)]
    pub full: bool,
}

impl Common {
    fn slots(&self) -> u64 {
        if self.full {
            FULL_SLOTS
        } else {
            self.slots.unwrap_or(DEFAULT_SLOTS)
        }
    }

    fn scenario(&self) -> Result<Scenario> {
        match &self.scenario {
            Some(p) => load_scenario(p),
            None => bail!("--scenario FILE is required"),
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct ThroughputArgs {
    /// Mean successful transmission length, in slots.
    #[arg(long = "l", default_value_t = 100.0)]
    pub l: f64,
    /// Collision length, in slots (at least 1).
    #[arg(long = "lc", default_value_t = 1.0)]
    pub l_c: f64,
    /// Per-success overhead, in slots.
    #[arg(long = "lo", default_value_t = 0.0)]
    pub l_o: f64,
    /// Highest backoff stage.
    #[arg(long = "k", default_value_t = 6)]
    pub k: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary solutions of the fixed-point equations.
    Fpe(Common),
    /// Integrate the mean-field ODE from all nodes in stage 0.
    Ode(Common),
    /// Simulate the exact finite-N chain.
    Sim(Common),
    /// Classify equilibria and look for a limit cycle.
    Stability(Common),
    /// Throughput-optimal attempt rate and multiplier.
    Throughput(ThroughputArgs),
    /// Reproduce a built-in example end to end.
    Repro {
        /// example1 or example2
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(crate::builtin::EXAMPLE_IDS))]
        id: String,
        #[command(flatten)]
        common: Common,
    },
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Scenario::from_json_str(&text).with_context(|| format!("invalid scenario {}", path.display()))
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<String> {
    let text = serde_json::to_string_pretty(value)?;
    let path = dir.join(name);
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    Ok(text)
}

#[derive(Debug, Serialize)]
struct SimSummary<'a> {
    seed: u64,
    slots: u64,
    window: u64,
    gamma_hat: Option<f64>,
    totals: &'a dtmc::WindowStats,
    runtime_s: f64,
}

/// Runs a parsed command. Returns whether every check passed.
pub fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Fpe(c) => {
            let s = c.scenario()?;
            prepare(&c.out)?;
            let sols = solve(&s).context("fpe")?;
            println!("{}", write_json(&c.out, "fpe.json", &sols)?);
            if let Some(curve) = residual_curve(&s, 2000) {
                let mut w = csv::Writer::from_path(c.out.join("residual.csv"))?;
                w.write_record(["gamma", "f_gamma"])?;
                for (g, f) in curve {
                    w.write_record([g.to_string(), f.to_string()])?;
                }
                w.flush()?;
            }
            Ok(true)
        }
        Command::Ode(c) => {
            let s = c.scenario()?;
            prepare(&c.out)?;
            let horizon = c.horizon.unwrap_or_else(|| default_horizon(&s));
            let mf = MeanField::new(&s);
            let traj = integrate(&mf, &s, &OccupancyState::all_stage_zero(&s), horizon, &Controls::default())
                .context("ode")?;
            let f = fs::File::create(c.out.join("trajectory.csv"))?;
            traj.write_csv(std::io::BufWriter::new(f))?;
            info!("{} samples, step {} {}", traj.times.len(), traj.step, traj.unit);
            Ok(true)
        }
        Command::Sim(c) => {
            let s = c.scenario()?;
            prepare(&c.out)?;
            let start = Instant::now();
            let stats = dtmc::run(&s, c.slots(), c.seed, c.window).context("sim")?;
            let f = fs::File::create(c.out.join("sim.csv"))?;
            stats.write_csv(std::io::BufWriter::new(f), &s)?;
            let summary = SimSummary {
                seed: c.seed,
                slots: c.slots(),
                window: c.window,
                gamma_hat: stats.totals.gamma_hat,
                totals: &stats.totals,
                runtime_s: start.elapsed().as_secs_f64(),
            };
            println!("{}", write_json(&c.out, "sim_summary.json", &summary)?);
            Ok(true)
        }
        Command::Stability(c) => {
            let s = c.scenario()?;
            prepare(&c.out)?;
            let eq = classify_equilibria(&s).context("stability")?;
            let cycle = match c.horizon {
                Some(h) => {
                    let mf = MeanField::new(&s);
                    let traj = integrate(&mf, &s, &OccupancyState::all_stage_zero(&s), h, &Controls::default())?;
                    Some(detect_limit_cycle(&traj, 0.5)?)
                }
                None => None,
            };
            let report = serde_json::json!({ "equilibria": eq, "cycle": cycle });
            println!("{}", write_json(&c.out, "stability.json", &report)?);
            Ok(true)
        }
        Command::Throughput(t) => {
            let p = ThroughputParams::new(t.l, t.l_c, t.l_o)?;
            let qstar = optimal_qbar(p.l_c)?;
            let mstar = fit_multiplier(1.0, qstar, t.k)?;
            let report = serde_json::json!({
                "qstar": qstar,
                "mstar": mstar,
                "q_vector": rate_profile(1.0, mstar, t.k),
                "omega_at_qstar": omega(qstar, &p),
            });
            prepare(&t.common.out)?;
            println!("{}", write_json(&t.common.out, "throughput.json", &report)?);
            Ok(true)
        }
        Command::Repro { id, common } => {
            let opts = ReproOptions {
                seed: common.seed,
                slots: common.slots(),
                window: common.window,
                horizon: common.horizon,
                full: common.full,
            };
            let report = repro::run(&id, &common.out, &opts)?;
            for c in &report.checks {
                println!("{} {}: {} (expected {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.expected);
            }
            for n in &report.notes {
                println!("note: {n}");
            }
            write_json(&common.out, "summary.json", &report)?;
            Ok(report.passed())
        }
    }
}
