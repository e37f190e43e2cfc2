//! Experiment configuration, loadable from JSON or TOML.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use platoon::metrics::EconomicParams;
use platoon::rational::{int, rat, serde_rat, serde_rat_vec, Rat};
use platoon::solver::{SolverConfig, SolverMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepartureWindow {
    pub low: f64,
    pub high: f64,
    pub mean: f64,
    /// Departures are rounded to this many minutes.
    #[serde(with = "serde_rat")]
    pub granularity: Rat,
}

impl Default for DepartureWindow {
    fn default() -> Self {
        DepartureWindow {
            low: 0.0,
            high: 100.0,
            mean: 50.0,
            granularity: int(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub mode: SolverMode,
    /// Seconds per solve.
    pub time_limit: f64,
    #[serde(with = "serde_rat")]
    pub delay_resolution: Rat,
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_limit: Option<u64>,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            mode: SolverMode::Exact,
            time_limit: 300.0,
            delay_resolution: int(1),
            workers: 1,
            node_limit: None,
            seed: 0,
        }
    }
}

impl SolverSettings {
    pub fn to_config(&self) -> Result<SolverConfig> {
        if !(self.time_limit.is_finite() && self.time_limit > 0.0) {
            bail!("solver time limit must be positive");
        }
        let cfg = SolverConfig {
            time_limit: Duration::from_secs_f64(self.time_limit),
            delay_resolution: self.delay_resolution,
            mode: self.mode,
            seed: self.seed,
            workers: self.workers,
            node_limit: self.node_limit,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rows: u32,
    pub cols: u32,
    pub vehicles: usize,
    /// Standard deviations of the departure distribution, one scenario family each.
    pub sigmas: Vec<f64>,
    /// Maximum waits `p`, minutes.
    #[serde(with = "serde_rat_vec")]
    pub waits: Vec<Rat>,
    pub departure: DepartureWindow,
    #[serde(with = "serde_rat")]
    pub eta: Rat,
    pub economics: EconomicParams,
    pub seeds: Vec<u64>,
    pub solver: SolverSettings,
    /// Ad hoc platoon join window, minutes.
    #[serde(with = "serde_rat")]
    pub headway: Rat,
    /// Scenarios run at once; 0 uses every core.
    pub jobs: usize,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            rows: 10,
            cols: 10,
            vehicles: 50,
            sigmas: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            waits: [0, 10, 20, 30, 40].into_iter().map(int).collect(),
            departure: DepartureWindow::default(),
            eta: rat(1, 10),
            economics: EconomicParams::default(),
            seeds: vec![0],
            solver: SolverSettings::default(),
            headway: int(0),
            jobs: 1,
            output: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    /// Reads a `.toml` file as TOML and anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.rows * self.cols < 2 {
            bail!("grid needs at least two nodes");
        }
        if self.vehicles == 0 {
            bail!("need at least one vehicle");
        }
        if self.waits.is_empty() {
            bail!("need at least one maximum wait");
        }
        if self.waits.iter().any(|p| *p < int(0)) {
            bail!("maximum waits must be nonnegative");
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            bail!("need at least one nonnegative departure standard deviation");
        }
        if self.seeds.is_empty() {
            bail!("need at least one seed");
        }
        if self.eta < int(0) || self.eta >= int(1) {
            bail!("eta must lie in [0, 1)");
        }
        if self.economics.eta != self.eta {
            bail!(
                "economics.eta ({}) differs from eta ({})",
                self.economics.eta,
                self.eta
            );
        }
        if self.headway < int(0) {
            bail!("headway must be nonnegative");
        }
        self.economics.validate()?;
        self.solver.to_config()?;
        Ok(())
    }
}
