//! Plans: the common output of the solvers and the ad hoc simulator.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, VehicleId};
use crate::network::{EdgeId, NodeId, Path, RoadNetwork};
use crate::rational::{int, serde_rat, serde_rat_vec, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    TimeLimitBest,
    Heuristic,
    /// Produced by the ad hoc platooning simulator.
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehiclePlan {
    pub vehicle: VehicleId,
    /// Node sequence from origin to destination.
    pub route: Vec<NodeId>,
    #[serde(with = "serde_rat")]
    pub delay: Rat,
    /// Entry time of each route edge, minutes.
    #[serde(with = "serde_rat_vec")]
    pub entry_times: Vec<Rat>,
    #[serde(with = "serde_rat")]
    pub arrival: Rat,
}

impl VehiclePlan {
    pub fn hops(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.route.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Vehicles travelling one edge together. Every member except the leader is a follower.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatoonGroup {
    pub from: NodeId,
    pub to: NodeId,
    /// Entry time of the leader.
    #[serde(with = "serde_rat")]
    pub entry_time: Rat,
    pub leader: VehicleId,
    /// All members including the leader, ascending.
    pub members: Vec<VehicleId>,
}

impl PlatoonGroup {
    pub fn followers(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.members
            .iter()
            .copied()
            .filter(move |m| *m != self.leader)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub vehicles: Vec<VehiclePlan>,
    pub platoons: Vec<PlatoonGroup>,
    #[serde(with = "serde_rat")]
    pub objective: Rat,
    pub status: SolveStatus,
}

impl Plan {
    /// Builds a plan from one (route, delay) choice per instance vehicle.
    ///
    /// Platoon-capable vehicles entering the same edge at the same instant form
    /// a group led by the smallest vehicle id.
    pub fn from_schedule(
        inst: &Instance,
        choices: &[(&Path, Rat)],
        status: SolveStatus,
    ) -> Result<Plan> {
        if choices.len() != inst.len() {
            return Err(Error::InvalidPlan(format!(
                "{} choices for {} vehicles",
                choices.len(),
                inst.len()
            )));
        }
        let net = inst.network();
        let mut vehicles = Vec::with_capacity(choices.len());
        let mut cells: BTreeMap<(NodeId, NodeId, Rat), Vec<VehicleId>> = BTreeMap::new();
        for (v, &(path, delay)) in inst.vehicles().iter().zip(choices) {
            let mut clock = v.earliest_departure + delay;
            let mut entry_times = Vec::with_capacity(path.edges.len());
            for &id in &path.edges {
                let e = net.edge(id);
                entry_times.push(clock);
                if v.platoon_capable {
                    cells.entry((e.from, e.to, clock)).or_default().push(v.id);
                }
                clock += e.time;
            }
            vehicles.push(VehiclePlan {
                vehicle: v.id,
                route: path.nodes.clone(),
                delay,
                entry_times,
                arrival: clock,
            });
        }
        let platoons = cells
            .into_iter()
            .filter(|(_, members)| members.len() >= 2)
            .map(|((from, to, entry_time), mut members)| {
                members.sort();
                PlatoonGroup {
                    from,
                    to,
                    entry_time,
                    leader: members[0],
                    members,
                }
            })
            .collect();
        Plan::assemble(inst, vehicles, platoons, status)
    }

    /// Wraps explicit per-vehicle schedules and platoon groups, computing the objective.
    pub fn assemble(
        inst: &Instance,
        vehicles: Vec<VehiclePlan>,
        platoons: Vec<PlatoonGroup>,
        status: SolveStatus,
    ) -> Result<Plan> {
        let mut plan = Plan {
            vehicles,
            platoons,
            objective: Rat::zero(),
            status,
        };
        plan.objective = plan.evaluate(inst, true)?;
        Ok(plan)
    }

    /// Route cost, less the followers' savings, plus waiting cost when `with_wait_cost`.
    pub fn evaluate(&self, inst: &Instance, with_wait_cost: bool) -> Result<Rat> {
        let net = inst.network();
        let mut total = Rat::zero();
        for vp in &self.vehicles {
            let k = inst
                .position_of(vp.vehicle)
                .ok_or_else(|| Error::InvalidPlan(format!("unknown vehicle {}", vp.vehicle)))?;
            for (from, to) in vp.hops() {
                total += net.edge(edge_of(net, from, to)?).cost;
            }
            if with_wait_cost {
                total += inst.wait_cost(k) * vp.delay;
            }
        }
        for g in &self.platoons {
            let cost = net.edge(edge_of(net, g.from, g.to)?).cost;
            let followers = g.members.len().saturating_sub(1) as i64;
            total -= inst.eta() * cost * int(followers);
        }
        Ok(total)
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&VehiclePlan> {
        self.vehicles.iter().find(|v| v.vehicle == id)
    }

    /// Structural sanity: routes exist, times line up with routes, and every
    /// group member actually traverses the group's edge.
    pub fn validate(&self, net: &RoadNetwork) -> Result<()> {
        for vp in &self.vehicles {
            if vp.route.len() < 2 {
                return Err(Error::InvalidPlan(format!(
                    "vehicle {} has an empty route",
                    vp.vehicle
                )));
            }
            if vp.entry_times.len() != vp.route.len() - 1 {
                return Err(Error::InvalidPlan(format!(
                    "vehicle {} entry times do not match its route",
                    vp.vehicle
                )));
            }
            let mut last = None;
            for ((from, to), &t) in vp.hops().zip(&vp.entry_times) {
                edge_of(net, from, to)?;
                if last.is_some_and(|prev| t < prev) {
                    return Err(Error::InvalidPlan(format!(
                        "vehicle {} moves backwards in time",
                        vp.vehicle
                    )));
                }
                last = Some(t);
            }
            if last.is_some_and(|t| vp.arrival < t) {
                return Err(Error::InvalidPlan(format!(
                    "vehicle {} arrives before its last entry",
                    vp.vehicle
                )));
            }
        }
        for g in &self.platoons {
            edge_of(net, g.from, g.to)?;
            if !g.members.contains(&g.leader) || g.members.len() < 2 {
                return Err(Error::InvalidPlan(format!(
                    "malformed platoon on {}->{}",
                    g.from, g.to
                )));
            }
            for m in &g.members {
                let on_edge = self
                    .vehicle(*m)
                    .is_some_and(|vp| vp.hops().any(|h| h == (g.from, g.to)));
                if !on_edge {
                    return Err(Error::InvalidPlan(format!(
                        "vehicle {} is grouped on {}->{} but does not use it",
                        m, g.from, g.to
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Plan> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }
}

pub(crate) fn edge_of(net: &RoadNetwork, from: NodeId, to: NodeId) -> Result<EdgeId> {
    net.edge_between(from, to)
        .ok_or_else(|| Error::InvalidPlan(format!("route uses missing edge {from}->{to}")))
}
