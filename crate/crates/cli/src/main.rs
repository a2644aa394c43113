//! `ringload`: overload analysis and simulation of a ring of servers.

mod config;
mod report;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{ensure, Context, Result};
use clap::{Parser, Subcommand};

use ringload::critical::{critical_table, phase_sweep};
use ringload::rates::{scenario, solve_theta_star};
use ringload::routing::{is_balanced, is_ring_balanced, maximal_balanced_sets, solve_arc, solve_ring, BALANCE_TOL};
use ringload::sim::{estimate_overload, overheat_census, trial_event_log, write_event_log, SimConfig};
use ringload::tables::{reproduce, DEFAULT_TOL};
use ringload::NetworkParams;

use config::{parse_subset, Flags, Format, RunConfig};
use report::*;

#[derive(Parser)]
#[command(
    name = "ringload",
    version,
    about = "Overload analysis of a ring of servers with join-the-lesser-workload routing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scenario rates J(λ,l), the optimal scenario and its profile.
    Analyze(Flags),
    /// Critical arrival rates of a ring.
    Critical(Flags),
    /// Optimal scenario over a grid of arrival rates.
    Phase(Flags),
    /// Balance server loads for given input slopes.
    Route(Flags),
    /// Estimate the overload probability by simulation.
    Simulate(Flags),
    /// Recompute the published reference values and compare.
    Reproduce(Flags),
}

/// Report text and whether the command succeeded.
struct Outcome {
    text: String,
    ok: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, ok: true }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<bool> {
    let (cfg, outcome) = match command {
        Command::Analyze(f) => with(f.resolve("analyze")?, analyze)?,
        Command::Critical(f) => with(f.resolve("critical")?, critical)?,
        Command::Phase(f) => with(f.resolve("phase")?, phase)?,
        Command::Route(f) => with(f.resolve("route")?, route)?,
        Command::Simulate(f) => with(f.resolve("simulate")?, simulate)?,
        Command::Reproduce(f) => with(f.resolve("reproduce")?, reproduce_cmd)?,
    };
    emit(&outcome.text, cfg.out.as_deref())?;
    Ok(outcome.ok)
}

fn with(cfg: RunConfig, f: fn(&RunConfig) -> Result<Outcome>) -> Result<(RunConfig, Outcome)> {
    let out = f(&cfg)?;
    Ok((cfg, out))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn params(cfg: &RunConfig) -> Result<NetworkParams> {
    Ok(NetworkParams::new(cfg.k()?, cfg.lambda()?, cfg.d(), cfg.model()?)?)
}

fn analyze(cfg: &RunConfig) -> Result<Outcome> {
    let p = params(cfg)?;
    let s = scenario(&p)?;
    let r = AnalyzeReport {
        model: p.model,
        k: p.k,
        lambda: p.lambda,
        d: p.d,
        hat_lambda: p.model.hat_lambda(),
        theta_star: solve_theta_star(&p.model, p.lambda)?,
        l_opt: s.l_opt,
        min_rate: s.min_rate(),
        scenarios: s.entries,
    };
    Ok(Outcome::ok(match cfg.format.unwrap_or(Format::Table) {
        Format::Table => analyze_table(&r),
        Format::Json => to_json(&r)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["l", "theta", "rate", "input_slope", "load_slope", "duration", "optimal"])?;
            let f = |x: Option<f64>| x.map(|v| round9(v).to_string()).unwrap_or_default();
            for e in &r.scenarios {
                let p = e.profile.as_ref();
                w.write_record([
                    e.l.to_string(),
                    f(p.map(|p| p.theta)),
                    f(e.rate),
                    f(p.map(|p| p.input_slope)),
                    f(p.map(|p| p.load_slope)),
                    f(p.map(|p| p.duration)),
                    (e.l == r.l_opt).to_string(),
                ])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
    }))
}

fn critical(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let r = CriticalReport { model, table: critical_table(&model, cfg.k()?, &[])? };
    Ok(Outcome::ok(match cfg.format.unwrap_or(Format::Table) {
        Format::Table => report::critical_table(&r),
        Format::Json => to_json(&r)?,
        Format::Csv => critical_csv(&r)?,
    }))
}

fn phase(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let r = PhaseReport { model, diagram: phase_sweep(&model, cfg.k()?, cfg.d(), &cfg.grid()?)? };
    Ok(Outcome::ok(match cfg.format.unwrap_or(Format::Csv) {
        Format::Table => phase_table(&r),
        Format::Json => to_json(&r)?,
        Format::Csv => phase_csv(&r)?,
    }))
}

fn route(cfg: &RunConfig) -> Result<Outcome> {
    let slopes = cfg.slopes.clone().context("missing --slopes")?;
    let k = slopes.len();
    ensure!(k >= 3, "a ring needs at least 3 slopes, got {k}");
    let subset = cfg.subset.as_deref().map(|s| parse_subset(s, k)).transpose()?;
    let (conf, alpha, balanced) = match &subset {
        Some(flows) => {
            let sub: Vec<f64> = flows.iter().map(|&f| slopes[f]).collect();
            let (c, a) = solve_arc(&sub, 1.0)?;
            (c, a, is_balanced(&sub, BALANCE_TOL)?)
        }
        None => {
            let (c, a) = solve_ring(&slopes, 1.0)?;
            (c, a, is_ring_balanced(&slopes, BALANCE_TOL)?)
        }
    };
    let maximal_sets = maximal_balanced_sets(&slopes, BALANCE_TOL)?
        .iter()
        .map(|arc| arc.flows(k).iter().map(|f| f + 1).collect())
        .collect();
    let r = RouteReport {
        slopes,
        subset: subset.map(|s| s.iter().map(|f| f + 1).collect()),
        imbalance: conf.imbalance,
        loads: conf.loads,
        alpha: alpha.0,
        balanced,
        maximal_sets,
    };
    Ok(Outcome::ok(match cfg.format.unwrap_or(Format::Table) {
        Format::Table => route_table(&r),
        Format::Json => to_json(&r)?,
        Format::Csv => route_csv(&r)?,
    }))
}

fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let p = params(cfg)?;
    let mut sim = SimConfig::new(p, cfg.n.unwrap_or(10), cfg.trials.unwrap_or(10_000), cfg.seed.unwrap_or(0));
    sim.warmup = cfg.warmup;
    sim.tilt = cfg.tilt()?;
    sim.window = cfg.window;
    let s = scenario(&p)?;
    let result = estimate_overload(&sim)?;
    let census = if cfg.census.unwrap_or(false) {
        Some(overheat_census(&sim, cfg.lookback, cfg.a_min.unwrap_or(1.0), cfg.eps.unwrap_or(0.1))?)
    } else {
        None
    };
    if let Some(path) = &cfg.event_log {
        let log = trial_event_log(&sim, 0)?;
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_event_log(&log, BufWriter::new(file))?;
    }
    let r = SimulateReport {
        model: p.model,
        k: p.k,
        lambda: p.lambda,
        d: p.d,
        n: sim.n,
        seed: sim.seed,
        tilt: sim.tilt,
        estimate: (&result).into(),
        prediction: Prediction { l_opt: s.l_opt, rate: s.min_rate() },
        census,
    };
    Ok(Outcome::ok(match cfg.format.unwrap_or(Format::Table) {
        Format::Table => simulate_table(&r),
        Format::Json => to_json(&r)?,
        Format::Csv => simulate_csv(&r)?,
    }))
}

fn reproduce_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let rows = reproduce(cfg.examples.as_deref().unwrap_or(&[]), tol)?;
    let all_pass = rows.iter().all(|r| r.pass);
    let r = ReproduceReport { tol, all_pass, rows };
    let text = match cfg.format.unwrap_or(Format::Table) {
        Format::Table => reproduce_table(&r),
        Format::Json => to_json(&r)?,
        Format::Csv => reproduce_csv(&r)?,
    };
    Ok(Outcome { text, ok: all_pass })
}
