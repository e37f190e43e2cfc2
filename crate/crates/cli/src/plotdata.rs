//! Long-format tables behind the wait, VMT-ratio and savings box plots.

use std::path::Path;

use anyhow::{bail, Result};

use crate::experiment::{RunOutcome, ScenarioResult};

pub const WAIT_FILE: &str = "wait_by_p.csv";
pub const VMT_FILE: &str = "vmt_ratio_by_p.csv";
pub const SAVINGS_FILE: &str = "savings.csv";

/// Writes one row per (scenario, mode, vehicle) into each of the three files.
pub fn emit_plot_data(scenarios: &[ScenarioResult], dir: &Path) -> Result<()> {
    if scenarios.is_empty() {
        bail!("no scenarios to plot");
    }
    let mut wait = csv::Writer::from_path(dir.join(WAIT_FILE))?;
    let mut vmt = csv::Writer::from_path(dir.join(VMT_FILE))?;
    let mut savings = csv::Writer::from_path(dir.join(SAVINGS_FILE))?;
    wait.write_record(["sigma", "p", "seed", "mode", "vehicle", "wait"])?;
    vmt.write_record(["sigma", "p", "seed", "mode", "vehicle", "vmt_ratio"])?;
    savings.write_record([
        "sigma",
        "p",
        "seed",
        "mode",
        "vehicle",
        "wait",
        "follower_vmt",
        "savings",
    ])?;
    for s in scenarios {
        let runs: [(&str, &Option<RunOutcome>); 2] = [
            ("opportunistic", &s.opportunistic),
            ("coordinated", &s.coordinated),
        ];
        for (mode, run) in runs {
            let Some(run) = run else { continue };
            for v in &run.report.vehicles {
                let key = [
                    s.sigma.to_string(),
                    s.p.clone(),
                    s.seed.to_string(),
                    mode.to_string(),
                    v.vehicle.0.to_string(),
                ];
                wait.write_record(key.iter().cloned().chain([format!("{:.6}", v.wait)]))?;
                vmt.write_record(key.iter().cloned().chain([format!("{:.6}", v.vmt_ratio)]))?;
                savings.write_record(key.iter().cloned().chain([
                    format!("{:.6}", v.wait),
                    format!("{:.6}", v.follower_vmt),
                    format!("{:.6}", v.savings),
                ]))?;
            }
        }
    }
    wait.flush()?;
    vmt.flush()?;
    savings.flush()?;
    Ok(())
}
