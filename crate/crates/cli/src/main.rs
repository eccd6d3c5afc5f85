//! `navsto`: the process entry point for simulations, verification runs and
//! reports. Every run writes its artifacts into a content-addressed directory
//! together with a manifest; the exit code is 0 (pass), 1 (fail),
//! 2 (inconclusive, e.g. blown-up paths) or 3 (usage, config or I/O error).

mod commands;
mod manifest;
mod report;

use std::ops::Range;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use navsto::dynamics::{Scheme, SimConfig};

use manifest::{now_unix, persist, Outcome, RunKey};

pub const EXIT_ERROR: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "navsto", version, about = "Stochastic Navier-Stokes Galerkin simulator and verification harness")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` configuration file (defaults for missing keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact root; overrides NAVSTO_OUT_ROOT (default `navsto-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Path ids `a..b` (half-open).
    #[arg(long, global = true, value_parser = parse_seeds)]
    seeds: Option<Range<u64>>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Replaces the configured time step.
    #[arg(long, global = true)]
    dt_override: Option<f64>,
    /// Replaces the configured scheme (`em` or `expo-em`).
    #[arg(long, global = true, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate paths and write their time series.
    Simulate(commands::SimulateArgs),
    /// Martingale suite for the projected process M^phi.
    VerifyMp2(commands::MartingaleArgs),
    /// Super-martingale suite for the energy functionals.
    VerifyEnergy(commands::MartingaleArgs),
    /// Maximal inequality for the energy functionals.
    VerifyDoob(commands::DoobArgs),
    /// Full against cut-off dynamics on shared noise up to the stopping time.
    VerifyWeakStrong(commands::WeakStrongArgs),
    /// Weighted gradient estimator against finite differences.
    BelProbe(commands::BelArgs),
    /// Bilinear-estimate ratios across resolutions.
    SweepInequalities(commands::SweepArgs),
    /// Build a control steering x to y and probe its continuity.
    ControlSteer(commands::ControlArgs),
    /// Selection cascade on the non-unique scalar toy problem.
    SelectDemo(commands::SelectArgs),
    /// Merge run manifests into one verdict table.
    Report(report::ReportArgs),
}

fn parse_seeds(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected `a..b`, got `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("seed start `{a}`: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("seed end `{b}`: {e}"))?;
    if b <= a {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..b)
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: navsto::Error| e.to_string())
}

impl Common {
    fn load_config(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                SimConfig::from_text(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => SimConfig::default(),
        };
        if let Some(dt) = self.dt_override {
            cfg.dt = dt;
        }
        if let Some(s) = self.scheme {
            cfg.scheme = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn seeds_or(&self, default: Range<u64>) -> Range<u64> {
        self.seeds.clone().unwrap_or(default)
    }

    fn out_root(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("NAVSTO_OUT_ROOT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("navsto-out"))
    }
}

fn run(cli: Cli) -> Result<u8> {
    let c = &cli.common;
    let workers = c.workers.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let started = now_unix();
    let clock = Instant::now();

    // (name, args, config, seeds, outcome)
    macro_rules! sim {
        ($name:literal, $a:expr, $default:expr, $f:expr) => {{
            let cfg = c.load_config()?;
            let seeds = c.seeds_or($default);
            let outcome: Outcome = pool.install(|| $f(&cfg, seeds.clone(), $a))?;
            ($name, serde_json::to_value($a)?, Some(cfg), Some(seeds), outcome)
        }};
    }
    let (name, args, config, seeds, outcome) = match &cli.command {
        Command::Simulate(a) => sim!("simulate", a, 0..1, commands::simulate),
        Command::VerifyMp2(a) => sim!("verify-mp2", a, 0..1000, commands::verify_mp2),
        Command::VerifyEnergy(a) => sim!("verify-energy", a, 0..1000, commands::verify_energy),
        Command::VerifyDoob(a) => sim!("verify-doob", a, 0..1000, commands::verify_doob),
        Command::VerifyWeakStrong(a) => sim!("verify-weak-strong", a, 0..100, commands::verify_weak_strong),
        Command::BelProbe(a) => sim!("bel-probe", a, 0..10_000, commands::bel_probe),
        Command::ControlSteer(a) => {
            let cfg = c.load_config()?;
            let outcome = pool.install(|| commands::control_steer(&cfg, a))?;
            ("control-steer", serde_json::to_value(a)?, Some(cfg), None, outcome)
        }
        Command::SweepInequalities(a) => {
            let seeds = c.seeds_or(0..100);
            let outcome = pool.install(|| commands::sweep(seeds.clone(), a))?;
            ("sweep-inequalities", serde_json::to_value(a)?, None, Some(seeds), outcome)
        }
        Command::SelectDemo(a) => {
            let outcome = pool.install(|| commands::select_demo(a))?;
            ("select-demo", serde_json::to_value(a)?, None, None, outcome)
        }
        Command::Report(a) => {
            let (outcome, args) = report::run(a)?;
            ("report", args, None, None, outcome)
        }
    };

    let key = RunKey {
        command: name.to_string(),
        args,
        config: config.as_ref().map(SimConfig::to_text),
        seeds: seeds.map(|s| [s.start, s.end]),
    };
    let (dir, manifest) = persist(&c.out_root(), &key, &outcome, workers, started, clock.elapsed().as_secs_f64())?;
    print!("{}", outcome.summary);
    if !outcome.summary.ends_with('\n') {
        println!();
    }
    println!("verdict: {}", manifest.verdict);
    println!("artifacts: {}", dir.display());
    Ok(manifest.verdict.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("3..10").unwrap(), 3..10);
        assert!(parse_seeds("5..5").is_err());
        assert!(parse_seeds("5").is_err());
        assert!(parse_seeds("a..4").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
