//! Solvers for the coordination problem.
//!
//! Departure delays live on a grid (`delay_resolution` minutes). All three
//! solvers search the same discrete space: every route within the detour
//! bound, every grid delay up to the waiting limit that still meets the
//! deadline.

mod exact;
mod heuristic;
mod oracle;
mod space;

use std::time::Duration;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instance::Instance;
use crate::plan::Plan;
use crate::rational::{int, Rat};

pub use exact::{solve_exact, solve_exact_with_stats, SearchStats};
pub use heuristic::solve_heuristic;
pub use oracle::{solve_oracle, MAX_COMBINATIONS, MAX_DELAY_POINTS, MAX_PATHS, MAX_VEHICLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    #[default]
    Exact,
    Heuristic,
    Oracle,
}

impl std::str::FromStr for SolverMode {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolverMode::Exact),
            "heuristic" => Ok(SolverMode::Heuristic),
            "oracle" => Ok(SolverMode::Oracle),
            other => Err(invalid(format!("unknown solver mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub time_limit: Duration,
    /// Delay grid spacing, minutes.
    pub delay_resolution: Rat,
    pub mode: SolverMode,
    pub seed: u64,
    /// Branch-and-bound threads. 1 gives fully deterministic plans.
    pub workers: usize,
    /// Stop the branch-and-bound after roughly this many nodes.
    pub node_limit: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: Duration::from_secs(300),
            delay_resolution: int(1),
            mode: SolverMode::Exact,
            seed: 0,
            workers: 1,
            node_limit: None,
        }
    }
}

impl SolverConfig {
    pub fn with_mode(mode: SolverMode) -> Self {
        SolverConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.time_limit.is_zero() {
            return Err(invalid("time limit must be positive"));
        }
        if self.delay_resolution <= Rat::zero() {
            return Err(invalid("delay resolution must be positive"));
        }
        if self.workers == 0 {
            return Err(invalid("need at least one worker"));
        }
        Ok(())
    }
}

/// Runs the solver selected by `cfg.mode`.
pub fn solve(inst: &Instance, cfg: &SolverConfig) -> Result<Plan> {
    match cfg.mode {
        SolverMode::Exact => solve_exact(inst, cfg),
        SolverMode::Heuristic => solve_heuristic(inst, cfg),
        SolverMode::Oracle => solve_oracle(inst, cfg),
    }
}
