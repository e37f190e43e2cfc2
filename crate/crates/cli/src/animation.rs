//! Sampled vehicle positions for an external viewer.

use std::collections::HashMap;

use anyhow::{bail, Result};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use platoon::instance::VehicleId;
use platoon::network::{NodeId, RoadNetwork};
use platoon::plan::Plan;
use platoon::rational::{int, serde_rat, to_f64, Rat};

const MAX_FRAMES: i64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehiclePosition {
    pub vehicle: VehicleId,
    pub from: NodeId,
    pub to: NodeId,
    /// Position along the route: index of the current edge in the route.
    pub hop: usize,
    /// Fraction of the current edge covered, 0 to 1.
    pub progress: f64,
    /// Platoon index in the plan's group list while travelling in one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub platoon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(with = "serde_rat")]
    pub time: Rat,
    pub vehicles: Vec<VehiclePosition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationTimeline {
    #[serde(with = "serde_rat")]
    pub interval: Rat,
    pub frames: Vec<Frame>,
}

/// Samples every `interval` minutes from the first departure to the last arrival.
/// Vehicles appear from their departure until their arrival.
pub fn export_animation(
    plan: &Plan,
    net: &RoadNetwork,
    interval: Rat,
) -> Result<AnimationTimeline> {
    if interval <= Rat::zero() {
        bail!("sampling interval must be positive");
    }
    plan.validate(net)?;
    let mut groups: HashMap<(VehicleId, NodeId, NodeId), usize> = HashMap::new();
    for (i, g) in plan.platoons.iter().enumerate() {
        for m in &g.members {
            groups.insert((*m, g.from, g.to), i);
        }
    }
    let start = plan
        .vehicles
        .iter()
        .filter_map(|v| v.entry_times.first())
        .min()
        .copied();
    let end = plan.vehicles.iter().map(|v| v.arrival).max();
    let (Some(start), Some(end)) = (start, end) else {
        return Ok(AnimationTimeline {
            interval,
            frames: Vec::new(),
        });
    };
    let first = (start / interval).floor().to_integer();
    let last = (end / interval).ceil().to_integer();
    if last - first >= MAX_FRAMES {
        bail!(
            "{} frames requested, limit is {MAX_FRAMES}",
            last - first + 1
        );
    }
    let mut frames = Vec::new();
    for step in first..=last {
        let time = interval * int(step);
        let mut vehicles = Vec::new();
        for vp in &plan.vehicles {
            let Some(&depart) = vp.entry_times.first() else {
                continue;
            };
            if time < depart || time > vp.arrival {
                continue;
            }
            let hops: Vec<(NodeId, NodeId)> = vp.hops().collect();
            let hop = vp
                .entry_times
                .partition_point(|t| *t <= time)
                .saturating_sub(1);
            let enter = vp.entry_times[hop];
            let leave = vp.entry_times.get(hop + 1).copied().unwrap_or(vp.arrival);
            let progress = if leave > enter {
                to_f64((time - enter) / (leave - enter))
            } else {
                1.0
            };
            let (from, to) = hops[hop];
            vehicles.push(VehiclePosition {
                vehicle: vp.vehicle,
                from,
                to,
                hop,
                progress,
                platoon: groups.get(&(vp.vehicle, from, to)).copied(),
            });
        }
        frames.push(Frame { time, vehicles });
    }
    Ok(AnimationTimeline { interval, frames })
}
