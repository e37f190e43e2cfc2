use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use platoon::adhoc::{simulate, FactorTable, SimConfig};
use platoon::instance::{generate_case_study, read_instance, save_instance, DepartureDistribution};
use platoon::metrics::{EconomicParams, MetricsReport};
use platoon::model::generate_variables;
use platoon::network::make_grid;
use platoon::plan::Plan;
use platoon::rational::{parse, Rat};
use platoon::solver::{solve, SolverMode};
use platoon_cli::config::{ExperimentConfig, SolverSettings};
use platoon_cli::{export_animation, run_experiment};

#[derive(Parser)]
#[command(
    name = "platoon",
    version,
    about = "Coordinated platooning: generate, solve, simulate, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random grid instance.
    Generate(GenerateArgs),
    /// Solve an instance with coordinated routing and departures.
    Solve(SolveArgs),
    /// Simulate ad hoc platooning on an instance.
    Simulate(SimulateArgs),
    /// Compute metrics for a plan.
    Metrics(MetricsArgs),
    /// Export an animation timeline for a plan.
    Animate(AnimateArgs),
    /// Run a scenario sweep.
    Experiment(ExperimentArgs),
}

fn rat_arg(s: &str) -> Result<Rat, String> {
    parse(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 10)]
    rows: u32,
    #[arg(long, default_value_t = 10)]
    cols: u32,
    #[arg(long, default_value_t = 50)]
    vehicles: usize,
    #[arg(long, default_value_t = 10.0)]
    sigma: f64,
    #[arg(long, default_value_t = 50.0)]
    mean: f64,
    #[arg(long, default_value_t = 0.0)]
    low: f64,
    #[arg(long, default_value_t = 100.0)]
    high: f64,
    /// Departure rounding, minutes.
    #[arg(long, default_value = "1", value_parser = rat_arg)]
    granularity: Rat,
    /// Maximum wait, minutes.
    #[arg(long, default_value = "10", value_parser = rat_arg)]
    p: Rat,
    #[arg(long, default_value = "0.1", value_parser = rat_arg)]
    eta: Rat,
    /// Waiting cost per minute.
    #[arg(long, default_value = "0", value_parser = rat_arg)]
    epsilon: Rat,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "exact")]
    mode: SolverMode,
    /// Seconds.
    #[arg(long, default_value_t = 300.0)]
    time_limit: f64,
    #[arg(long, default_value = "1", value_parser = rat_arg)]
    delay_resolution: Rat,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long = "solver-seed", default_value_t = 0)]
    solver_seed: u64,
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        SolverSettings {
            mode: self.mode,
            time_limit: self.time_limit,
            delay_resolution: self.delay_resolution,
            workers: self.workers,
            node_limit: self.node_limit,
            seed: self.solver_seed,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Platoon join window, minutes.
    #[arg(long, default_value = "0", value_parser = rat_arg)]
    headway: Rat,
    /// Finite link capacity with Newell storage limits.
    #[arg(long)]
    congestion: bool,
    /// Capacity factor table (share, multiplier).
    #[arg(long)]
    factors: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EconArgs {
    /// Gallons per mile.
    #[arg(long, default_value = "0.04", value_parser = rat_arg)]
    fuel_consumption: Rat,
    /// Dollars per gallon.
    #[arg(long, default_value = "3", value_parser = rat_arg)]
    fuel_cost: Rat,
    /// Dollars per hour.
    #[arg(long, default_value = "30", value_parser = rat_arg)]
    value_of_time: Rat,
    #[arg(long, default_value = "0.621371", value_parser = rat_arg)]
    miles_per_km: Rat,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[command(flatten)]
    econ: EconArgs,
    /// Per-vehicle table; stdout when neither output is given.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct AnimateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Sampling interval, minutes.
    #[arg(long, default_value = "1", value_parser = rat_arg)]
    interval: Rat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON or TOML config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rows: Option<u32>,
    #[arg(long)]
    cols: Option<u32>,
    #[arg(long)]
    vehicles: Option<usize>,
    #[arg(long = "sigma", num_args = 1..)]
    sigmas: Option<Vec<f64>>,
    #[arg(long = "p", num_args = 1.., value_parser = rat_arg)]
    waits: Option<Vec<Rat>>,
    #[arg(long)]
    low: Option<f64>,
    #[arg(long)]
    high: Option<f64>,
    #[arg(long)]
    mean: Option<f64>,
    #[arg(long, value_parser = rat_arg)]
    granularity: Option<Rat>,
    #[arg(long, value_parser = rat_arg)]
    eta: Option<Rat>,
    #[arg(long, value_parser = rat_arg)]
    fuel_consumption: Option<Rat>,
    #[arg(long, value_parser = rat_arg)]
    fuel_cost: Option<Rat>,
    #[arg(long, value_parser = rat_arg)]
    value_of_time: Option<Rat>,
    #[arg(long, value_parser = rat_arg)]
    miles_per_km: Option<Rat>,
    #[arg(long = "seed", num_args = 1..)]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    mode: Option<SolverMode>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, value_parser = rat_arg)]
    delay_resolution: Option<Rat>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long)]
    solver_seed: Option<u64>,
    #[arg(long, value_parser = rat_arg)]
    headway: Option<Rat>,
    /// Scenarios at once; 0 uses every core.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ExperimentArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { cfg.$($field).+ = v; })*
            };
        }
        set!(
            rows => rows, cols => cols, vehicles => vehicles, sigmas => sigmas, waits => waits,
            low => departure.low, high => departure.high, mean => departure.mean,
            granularity => departure.granularity, eta => eta,
            fuel_consumption => economics.fuel_consumption, fuel_cost => economics.fuel_cost,
            value_of_time => economics.value_of_time, miles_per_km => economics.miles_per_km,
            seeds => seeds, mode => solver.mode, time_limit => solver.time_limit,
            delay_resolution => solver.delay_resolution, workers => solver.workers,
            solver_seed => solver.seed, headway => headway, jobs => jobs, output => output,
        );
        if self.eta.is_some() {
            cfg.economics.eta = cfg.eta;
        }
        if self.node_limit.is_some() {
            cfg.solver.node_limit = self.node_limit;
        }
        Ok(cfg)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read_plan(path: &Path) -> Result<Plan> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Plan::from_json(&text)?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate(a) => {
            let net = Arc::new(make_grid(
                a.rows,
                a.cols,
                Rat::from_integer(1),
                Rat::from_integer(1),
            )?);
            let dist = DepartureDistribution {
                low: a.low,
                high: a.high,
                mean: a.mean,
                std_dev: a.sigma,
                granularity: Some(a.granularity),
            };
            let inst = generate_case_study(net, a.vehicles, &dist, a.p, a.seed)?
                .with_eta(a.eta)?
                .with_wait_cost(a.epsilon)?;
            emit(a.out.as_deref(), &save_instance(&inst)?)?;
        }
        Command::Solve(a) => {
            let inst = read_instance(&a.instance)?;
            let plan = solve(&inst, &a.solver.settings().to_config()?)?;
            let violations = generate_variables(&inst)?.audit_plan(&plan)?;
            eprintln!(
                "objective {} ({:?}), {} platoon groups, {} violations",
                plan.objective,
                plan.status,
                plan.platoons.len(),
                violations.len()
            );
            emit(a.out.as_deref(), &plan.to_json()?)?;
        }
        Command::Simulate(a) => {
            let inst = read_instance(&a.instance)?;
            let factors = match &a.factors {
                Some(path) => FactorTable::read(path)?,
                None => FactorTable::identity(),
            };
            let cfg = SimConfig {
                headway: a.headway,
                congestion: a.congestion,
                factors,
            };
            let plan = simulate(&inst, &cfg)?.plan;
            eprintln!(
                "objective {}, {} platoon groups",
                plan.objective,
                plan.platoons.len()
            );
            emit(a.out.as_deref(), &plan.to_json()?)?;
        }
        Command::Metrics(a) => {
            let inst = read_instance(&a.instance)?;
            let plan = read_plan(&a.plan)?;
            let econ = EconomicParams {
                eta: inst.eta(),
                fuel_consumption: a.econ.fuel_consumption,
                fuel_cost: a.econ.fuel_cost,
                value_of_time: a.econ.value_of_time,
                miles_per_km: a.econ.miles_per_km,
            };
            let report = MetricsReport::compute(&plan, &inst, &econ)?;
            if a.csv.is_none() && a.json.is_none() {
                print!("{}", report.to_csv()?);
            }
            if let Some(path) = &a.csv {
                emit(Some(path), &report.to_csv()?)?;
            }
            if let Some(path) = &a.json {
                emit(Some(path), &report.to_json()?)?;
            }
        }
        Command::Animate(a) => {
            let inst = read_instance(&a.instance)?;
            let plan = read_plan(&a.plan)?;
            let timeline = export_animation(&plan, inst.network(), a.interval)?;
            emit(a.out.as_deref(), &serde_json::to_string_pretty(&timeline)?)?;
        }
        Command::Experiment(a) => {
            let cfg = a.into_config()?;
            let outcome = run_experiment(&cfg)?;
            let failed = outcome.scenarios.iter().filter(|s| !s.completed()).count();
            eprintln!(
                "{} scenarios, {} failed; results in {}",
                outcome.scenarios.len(),
                failed,
                outcome.dir.display()
            );
            return Ok(outcome.all_completed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
