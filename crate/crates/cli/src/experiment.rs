//! Scenario sweep: for every (sigma, p, seed) build an instance, run the ad
//! hoc baseline and the coordinated solver, and write reports.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use platoon::adhoc::{simulate, SimConfig};
use platoon::instance::{generate_case_study, save_instance, DepartureDistribution, Instance};
use platoon::metrics::MetricsReport;
use platoon::model::generate_variables;
use platoon::network::{make_grid, RoadNetwork};
use platoon::plan::{Plan, SolveStatus};
use platoon::rational::{int, to_decimal, Rat};
use platoon::solver::solve;

use crate::config::ExperimentConfig;
use crate::plotdata::emit_plot_data;

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub status: SolveStatus,
    pub objective: String,
    /// Feasibility violations found by the model audit.
    pub violations: usize,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub sigma: f64,
    pub p: String,
    pub seed: u64,
    pub opportunistic: Option<RunOutcome>,
    pub coordinated: Option<RunOutcome>,
    pub error: Option<String>,
}

impl ScenarioResult {
    pub fn completed(&self) -> bool {
        self.error.is_none() && self.opportunistic.is_some() && self.coordinated.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub scenarios: Vec<ScenarioResult>,
}

impl ExperimentOutcome {
    pub fn all_completed(&self) -> bool {
        self.scenarios.iter().all(ScenarioResult::completed)
    }
}

pub fn label(value: Rat) -> String {
    to_decimal(value).unwrap_or_else(|| format!("{}_{}", value.numer(), value.denom()))
}

pub fn scenario_dir(root: &Path, sigma: f64, p: Rat, seed: u64) -> PathBuf {
    root.join(format!("sigma-{sigma}_p-{}_seed-{seed}", label(p)))
}

fn outcome(inst: &Instance, plan: &Plan, cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let violations = generate_variables(inst)?.audit_plan(plan)?.len();
    Ok(RunOutcome {
        status: plan.status,
        objective: plan.objective.to_string(),
        violations,
        report: MetricsReport::compute(plan, inst, &cfg.economics)?,
    })
}

fn write_run(dir: &Path, name: &str, plan: &Plan, run: &RunOutcome) -> Result<()> {
    std::fs::write(dir.join(format!("{name}.plan.json")), plan.to_json()?)?;
    std::fs::write(
        dir.join(format!("{name}.metrics.csv")),
        run.report.to_csv()?,
    )?;
    std::fs::write(
        dir.join(format!("{name}.metrics.json")),
        run.report.to_json()?,
    )?;
    Ok(())
}

/// Builds the instance a scenario runs on.
pub fn scenario_instance(
    net: Arc<RoadNetwork>,
    cfg: &ExperimentConfig,
    sigma: f64,
    p: Rat,
    seed: u64,
) -> Result<Instance> {
    let dist = DepartureDistribution {
        low: cfg.departure.low,
        high: cfg.departure.high,
        mean: cfg.departure.mean,
        std_dev: sigma,
        granularity: Some(cfg.departure.granularity),
    };
    let inst = generate_case_study(net, cfg.vehicles, &dist, p, seed)?;
    Ok(inst.with_eta(cfg.eta)?)
}

fn run_scenario(
    net: Arc<RoadNetwork>,
    cfg: &ExperimentConfig,
    sigma: f64,
    p: Rat,
    seed: u64,
) -> ScenarioResult {
    let mut result = ScenarioResult {
        sigma,
        p: label(p),
        seed,
        opportunistic: None,
        coordinated: None,
        error: None,
    };
    let attempt = (|| -> Result<()> {
        let dir = scenario_dir(&cfg.output, sigma, p, seed);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let inst = scenario_instance(net, cfg, sigma, p, seed)?;
        std::fs::write(dir.join("instance.json"), save_instance(&inst)?)?;

        let sim = SimConfig {
            headway: cfg.headway,
            ..Default::default()
        };
        let baseline = simulate(&inst, &sim)?.plan;
        let run = outcome(&inst, &baseline, cfg)?;
        write_run(&dir, "opportunistic", &baseline, &run)?;
        result.opportunistic = Some(run);

        let plan = solve(&inst, &cfg.solver.to_config()?)?;
        let run = outcome(&inst, &plan, cfg)?;
        write_run(&dir, "coordinated", &plan, &run)?;
        result.coordinated = Some(run);
        Ok(())
    })();
    if let Err(e) = attempt {
        log::warn!("scenario sigma={sigma} p={p} seed={seed} failed: {e:#}");
        result.error = Some(format!("{e:#}"));
    }
    result
}

/// Runs every scenario and writes `runs.csv`, `comparison.csv` and the plot data.
///
/// A failing scenario is recorded and the sweep carries on.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output)
        .with_context(|| format!("creating {}", cfg.output.display()))?;
    let net = Arc::new(make_grid(cfg.rows, cfg.cols, int(1), int(1))?);
    let mut jobs = Vec::new();
    for &sigma in &cfg.sigmas {
        for &p in &cfg.waits {
            for &seed in &cfg.seeds {
                jobs.push((sigma, p, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()?;
    let scenarios: Vec<ScenarioResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(sigma, p, seed)| {
                log::info!("scenario sigma={sigma} p={p} seed={seed}");
                run_scenario(net.clone(), cfg, sigma, p, seed)
            })
            .collect()
    });
    write_runs(&cfg.output.join("runs.csv"), &scenarios)?;
    write_comparison(&cfg.output.join("comparison.csv"), &scenarios)?;
    emit_plot_data(&scenarios, &cfg.output)?;
    Ok(ExperimentOutcome {
        dir: cfg.output.clone(),
        scenarios,
    })
}

fn report(run: &Option<RunOutcome>) -> &MetricsReport {
    &run.as_ref().expect("completed run").report
}

fn fmt(x: f64) -> String {
    format!("{:.6}", x)
}

fn write_runs(path: &Path, scenarios: &[ScenarioResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "sigma",
        "p",
        "seed",
        "mode",
        "status",
        "objective",
        "fuel_use",
        "mean_vmt_ratio",
        "aggregate_vmt_ratio",
        "mean_wait",
        "total_savings",
        "violations",
        "error",
    ])?;
    for s in scenarios {
        for (mode, run) in [
            ("opportunistic", &s.opportunistic),
            ("coordinated", &s.coordinated),
        ] {
            let key = [
                s.sigma.to_string(),
                s.p.clone(),
                s.seed.to_string(),
                mode.to_string(),
            ];
            let row: Vec<String> = match run {
                Some(r) => key
                    .into_iter()
                    .chain([
                        serde_json::to_value(r.status)?
                            .as_str()
                            .unwrap_or_default()
                            .to_string(),
                        r.objective.clone(),
                        fmt(r.report.fuel_use),
                        fmt(r.report.mean_vmt_ratio),
                        fmt(r.report.aggregate_vmt_ratio),
                        fmt(r.report.mean_wait),
                        fmt(r.report.total_savings),
                        r.violations.to_string(),
                        String::new(),
                    ])
                    .collect(),
                None => key
                    .into_iter()
                    .chain(std::iter::repeat_n(String::new(), 8))
                    .chain([s.error.clone().unwrap_or_else(|| "not run".into())])
                    .collect(),
            };
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per (sigma, p): means over seeds of the per-run mean VMT ratio and mean wait.
fn write_comparison(path: &Path, scenarios: &[ScenarioResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "sigma",
        "p",
        "runs",
        "failed",
        "opportunistic_mean_vmt_ratio",
        "coordinated_mean_vmt_ratio",
        "opportunistic_mean_wait",
        "coordinated_mean_wait",
    ])?;
    let mut keys: Vec<(f64, &str)> = Vec::new();
    for s in scenarios {
        if !keys.contains(&(s.sigma, s.p.as_str())) {
            keys.push((s.sigma, s.p.as_str()));
        }
    }
    for (sigma, p) in keys {
        let group: Vec<&ScenarioResult> = scenarios
            .iter()
            .filter(|s| s.sigma == sigma && s.p == p)
            .collect();
        let done: Vec<&ScenarioResult> = group.iter().copied().filter(|s| s.completed()).collect();
        let mean = |f: &dyn Fn(&ScenarioResult) -> f64| {
            if done.is_empty() {
                String::new()
            } else {
                fmt(done.iter().map(|s| f(s)).sum::<f64>() / done.len() as f64)
            }
        };
        w.write_record([
            sigma.to_string(),
            p.to_string(),
            group.len().to_string(),
            (group.len() - done.len()).to_string(),
            mean(&|s| report(&s.opportunistic).mean_vmt_ratio),
            mean(&|s| report(&s.coordinated).mean_vmt_ratio),
            mean(&|s| report(&s.opportunistic).mean_wait),
            mean(&|s| report(&s.coordinated).mean_wait),
        ])?;
    }
    w.flush()?;
    Ok(())
}
