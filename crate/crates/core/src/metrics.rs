//! Evaluation of a plan: platoon VMT ratios, waits, fuel and dollar savings.
//!
//! Platoon VMT for the ratio counts every group member, leaders included.
//! Dollar savings only credit followers, since only they burn less fuel.

use std::collections::HashMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instance::{Instance, VehicleId};
use crate::network::RoadNetwork;
use crate::plan::{edge_of, Plan};
use crate::rational::{int, rat, serde_rat, to_f64, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EconomicParams {
    #[serde(with = "serde_rat")]
    pub eta: Rat,
    /// Gallons per mile.
    #[serde(with = "serde_rat")]
    pub fuel_consumption: Rat,
    /// Dollars per gallon.
    #[serde(with = "serde_rat")]
    pub fuel_cost: Rat,
    /// Dollars per hour.
    #[serde(with = "serde_rat")]
    pub value_of_time: Rat,
    #[serde(with = "serde_rat")]
    pub miles_per_km: Rat,
}

impl Default for EconomicParams {
    fn default() -> Self {
        EconomicParams {
            eta: rat(1, 10),
            fuel_consumption: rat(1, 25),
            fuel_cost: int(3),
            value_of_time: int(30),
            miles_per_km: rat(621_371, 1_000_000),
        }
    }
}

impl EconomicParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.eta,
            self.fuel_consumption,
            self.fuel_cost,
            self.value_of_time,
            self.miles_per_km,
        ];
        if fields.iter().any(|v| *v < Rat::zero()) {
            return Err(invalid("economic parameters must be nonnegative"));
        }
        if self.eta >= int(1) {
            return Err(invalid("eta must be below 1"));
        }
        Ok(())
    }

    /// Follower miles times fuel saved per mile, less the value of the wait.
    pub fn savings(&self, follower_miles: Rat, wait_minutes: Rat) -> Rat {
        follower_miles * self.eta * self.fuel_consumption * self.fuel_cost
            - wait_minutes / int(60) * self.value_of_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    PerVehicle,
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleMetrics {
    pub vehicle: VehicleId,
    pub total_vmt: f64,
    /// Miles in a group of two or more, leaders included.
    pub platoon_vmt: f64,
    pub follower_vmt: f64,
    pub vmt_ratio: f64,
    /// Minutes.
    pub wait: f64,
    pub savings: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    /// Quartiles by linear interpolation between order statistics. Empty input gives zeros.
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary {
                min: 0.0,
                q1: 0.0,
                median: 0.0,
                mean: 0.0,
                q3: 0.0,
                max: 0.0,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let pos = q * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Summary {
            min: v[0],
            q1: at(0.25),
            median: at(0.5),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q3: at(0.75),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub vehicles: Vec<VehicleMetrics>,
    pub mean_vmt_ratio: f64,
    pub aggregate_vmt_ratio: f64,
    pub mean_wait: f64,
    pub wait: Summary,
    pub savings: Summary,
    pub total_savings: f64,
    /// Plan objective without waiting cost.
    pub fuel_use: f64,
}

struct Miles {
    total: Rat,
    platoon: Rat,
    follower: Rat,
}

fn miles(plan: &Plan, net: &RoadNetwork, econ: &EconomicParams) -> Result<Vec<Miles>> {
    let mut member: HashMap<(VehicleId, usize), bool> = HashMap::new();
    for g in &plan.platoons {
        if g.members.len() < 2 {
            continue;
        }
        for m in &g.members {
            let vp = plan
                .vehicle(*m)
                .ok_or_else(|| Error::InvalidPlan(format!("group names unknown vehicle {m}")))?;
            let hop = vp.hops().position(|h| h == (g.from, g.to)).ok_or_else(|| {
                Error::InvalidPlan(format!("vehicle {m} does not use {}->{}", g.from, g.to))
            })?;
            member.insert((*m, hop), *m != g.leader);
        }
    }
    plan.vehicles
        .iter()
        .map(|vp| {
            let mut out = Miles {
                total: Rat::zero(),
                platoon: Rat::zero(),
                follower: Rat::zero(),
            };
            for (i, (from, to)) in vp.hops().enumerate() {
                let len = net.edge(edge_of(net, from, to)?).length_km() * econ.miles_per_km;
                out.total += len;
                if let Some(&follower) = member.get(&(vp.vehicle, i)) {
                    out.platoon += len;
                    if follower {
                        out.follower += len;
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

/// Platoon VMT over total VMT, per vehicle (in plan order) or for the whole plan.
pub fn vmt_ratio(
    plan: &Plan,
    net: &RoadNetwork,
    econ: &EconomicParams,
    scope: Scope,
) -> Result<Vec<Rat>> {
    if plan.vehicles.is_empty() {
        return Err(invalid("plan has no vehicles"));
    }
    let m = miles(plan, net, econ)?;
    let ratio = |platoon: Rat, total: Rat| {
        if total.is_zero() {
            Rat::zero()
        } else {
            platoon / total
        }
    };
    Ok(match scope {
        Scope::PerVehicle => m.iter().map(|x| ratio(x.platoon, x.total)).collect(),
        Scope::Aggregate => {
            let platoon = m.iter().map(|x| x.platoon).sum();
            let total = m.iter().map(|x| x.total).sum();
            vec![ratio(platoon, total)]
        }
    })
}

/// Dollar savings per vehicle (in plan order), or their sum.
pub fn savings(
    plan: &Plan,
    net: &RoadNetwork,
    econ: &EconomicParams,
    scope: Scope,
) -> Result<Vec<Rat>> {
    let m = miles(plan, net, econ)?;
    let each: Vec<Rat> = m
        .iter()
        .zip(&plan.vehicles)
        .map(|(x, vp)| econ.savings(x.follower, vp.delay))
        .collect();
    Ok(match scope {
        Scope::PerVehicle => each,
        Scope::Aggregate => vec![each.into_iter().sum()],
    })
}

/// Objective of the plan with waiting cost left out.
pub fn fuel_use(plan: &Plan, inst: &Instance) -> Result<Rat> {
    plan.evaluate(inst, false)
}

pub fn wait_stats(plan: &Plan) -> Summary {
    let waits: Vec<f64> = plan.vehicles.iter().map(|v| to_f64(v.delay)).collect();
    Summary::of(&waits)
}

impl MetricsReport {
    pub fn compute(plan: &Plan, inst: &Instance, econ: &EconomicParams) -> Result<Self> {
        econ.validate()?;
        let net = inst.network();
        let m = miles(plan, net, econ)?;
        let vehicles: Vec<VehicleMetrics> = m
            .iter()
            .zip(&plan.vehicles)
            .map(|(x, vp)| VehicleMetrics {
                vehicle: vp.vehicle,
                total_vmt: to_f64(x.total),
                platoon_vmt: to_f64(x.platoon),
                follower_vmt: to_f64(x.follower),
                vmt_ratio: if x.total.is_zero() {
                    0.0
                } else {
                    to_f64(x.platoon / x.total)
                },
                wait: to_f64(vp.delay),
                savings: to_f64(econ.savings(x.follower, vp.delay)),
            })
            .collect();
        let n = vehicles.len().max(1) as f64;
        let total: f64 = vehicles.iter().map(|v| v.total_vmt).sum();
        let platoon: f64 = vehicles.iter().map(|v| v.platoon_vmt).sum();
        let dollars: Vec<f64> = vehicles.iter().map(|v| v.savings).collect();
        Ok(MetricsReport {
            mean_vmt_ratio: vehicles.iter().map(|v| v.vmt_ratio).sum::<f64>() / n,
            aggregate_vmt_ratio: if total > 0.0 { platoon / total } else { 0.0 },
            mean_wait: vehicles.iter().map(|v| v.wait).sum::<f64>() / n,
            wait: wait_stats(plan),
            savings: Summary::of(&dollars),
            total_savings: dollars.iter().sum(),
            fuel_use: to_f64(fuel_use(plan, inst)?),
            vehicles,
        })
    }

    /// One row per vehicle plus an `ALL` row holding totals and means.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "vehicle",
            "total_vmt",
            "platoon_vmt",
            "follower_vmt",
            "vmt_ratio",
            "wait",
            "savings",
        ])?;
        for v in &self.vehicles {
            w.write_record([
                v.vehicle.0.to_string(),
                fmt(v.total_vmt),
                fmt(v.platoon_vmt),
                fmt(v.follower_vmt),
                fmt(v.vmt_ratio),
                fmt(v.wait),
                fmt(v.savings),
            ])?;
        }
        let sum = |f: fn(&VehicleMetrics) -> f64| self.vehicles.iter().map(f).sum::<f64>();
        w.write_record([
            "ALL".to_string(),
            fmt(sum(|v| v.total_vmt)),
            fmt(sum(|v| v.platoon_vmt)),
            fmt(sum(|v| v.follower_vmt)),
            fmt(self.aggregate_vmt_ratio),
            fmt(self.mean_wait),
            fmt(self.total_savings),
        ])?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn fmt(x: f64) -> String {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        "0".to_string()
    } else {
        r.to_string()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::instance::Vehicle;
    use crate::network::{make_grid, make_grid_with, FundamentalDiagram, NodeId};
    use crate::plan::{PlatoonGroup, SolveStatus};

    fn econ_km() -> EconomicParams {
        EconomicParams {
            miles_per_km: int(1),
            ..Default::default()
        }
    }

    fn pair(shared: bool) -> (Instance, Plan) {
        let net = Arc::new(make_grid(1, 4, int(1), int(1)).unwrap());
        let vehicles = vec![
            Vehicle::new(0, NodeId(0), NodeId(3), int(0), int(3)),
            Vehicle::new(
                1,
                NodeId(0),
                NodeId(3),
                if shared { int(0) } else { int(1) },
                int(4),
            ),
        ];
        let inst = Instance::new(net, vehicles, int(0), rat(1, 10), int(0)).unwrap();
        let a = inst.shortest_path(0).clone();
        let plan = Plan::from_schedule(&inst, &[(&a, int(0)), (&a, int(0))], SolveStatus::Optimal)
            .unwrap();
        (inst, plan)
    }

    #[test]
    fn full_route_platoon_ratio_is_one() {
        let (inst, plan) = pair(true);
        let r = vmt_ratio(&plan, inst.network(), &econ_km(), Scope::PerVehicle).unwrap();
        assert_eq!(r, vec![int(1), int(1)]);
        assert_eq!(
            vmt_ratio(&plan, inst.network(), &econ_km(), Scope::Aggregate).unwrap(),
            vec![int(1)]
        );
        assert_eq!(fuel_use(&plan, &inst).unwrap(), rat(57, 10));
        let s = savings(&plan, inst.network(), &econ_km(), Scope::PerVehicle).unwrap();
        assert_eq!(s[0], int(0));
        assert_eq!(s[1], int(3) * rat(12, 1000));
    }

    #[test]
    fn no_platooning_ratio_is_zero() {
        let (inst, plan) = pair(false);
        assert!(plan.platoons.is_empty());
        assert_eq!(
            vmt_ratio(&plan, inst.network(), &econ_km(), Scope::Aggregate).unwrap(),
            vec![int(0)]
        );
        let report = MetricsReport::compute(&plan, &inst, &econ_km()).unwrap();
        assert_eq!(report.mean_vmt_ratio, 0.0);
        assert_eq!(report.wait.mean, 0.0);
        assert_eq!(report.fuel_use, 6.0);
    }

    #[test]
    fn partial_platoon_ratio() {
        let net = Arc::new(make_grid(1, 8, int(1), int(1)).unwrap());
        let vehicles = vec![
            Vehicle::new(0, NodeId(0), NodeId(7), int(0), int(7)),
            Vehicle::new(1, NodeId(0), NodeId(3), int(0), int(3)),
        ];
        let inst = Instance::new(net, vehicles, int(0), rat(1, 10), int(0)).unwrap();
        let plan = crate::adhoc::simulate_opportunistic(&inst).unwrap();
        let r = vmt_ratio(&plan, inst.network(), &econ_km(), Scope::PerVehicle).unwrap();
        assert_eq!(r, vec![rat(3, 7), int(1)]);
        assert_eq!(fuel_use(&plan, &inst).unwrap(), rat(97, 10));
    }

    #[test]
    fn savings_arithmetic() {
        let econ = EconomicParams::default();
        let s = econ.savings(int(7), int(5));
        assert!((to_f64(s) + 2.416).abs() < 1e-9);
        assert_eq!(econ.savings(int(0), int(0)), int(0));
        assert_eq!(econ.savings(int(10), int(0)), rat(12, 100));
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[0.0, 5.0, 10.0]);
        assert_eq!((s.min, s.median, s.mean, s.max), (0.0, 5.0, 5.0, 10.0));
        assert_eq!((s.q1, s.q3), (2.5, 7.5));
        assert_eq!(Summary::of(&[]).mean, 0.0);
    }

    #[test]
    fn empty_plan() {
        let (inst, _) = pair(true);
        let empty = Plan {
            vehicles: vec![],
            platoons: vec![],
            objective: int(0),
            status: SolveStatus::Optimal,
        };
        assert!(vmt_ratio(&empty, inst.network(), &econ_km(), Scope::Aggregate).is_err());
        assert_eq!(fuel_use(&empty, &inst).unwrap(), int(0));
    }

    #[test]
    fn csv_and_json_output() {
        let (inst, plan) = pair(true);
        let report = MetricsReport::compute(&plan, &inst, &EconomicParams::default()).unwrap();
        let csv = report.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("vehicle,total_vmt"));
        assert!(lines[3].starts_with("ALL,"));
        let back: MetricsReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(back.vehicles.len(), 2);
    }

    #[test]
    fn bad_group_is_rejected() {
        let (inst, mut plan) = pair(true);
        plan.platoons.push(PlatoonGroup {
            from: NodeId(2),
            to: NodeId(1),
            entry_time: int(0),
            leader: VehicleId(0),
            members: vec![VehicleId(0), VehicleId(1)],
        });
        assert!(MetricsReport::compute(&plan, &inst, &econ_km()).is_err());
    }

    proptest! {
        #[test]
        fn savings_is_linear_with_formula_signs(miles in 0i64..200, wait in 0i64..60, extra in 1i64..20) {
            let econ = EconomicParams::default();
            let base = econ.savings(int(miles), int(wait));
            prop_assert!(econ.savings(int(miles), int(wait + extra)) < base);
            prop_assert!(econ.savings(int(miles + extra), int(wait)) > base);
            let slope = econ.savings(int(miles + 1), int(wait)) - base;
            prop_assert_eq!(econ.savings(int(miles + extra), int(wait)) - base, slope * int(extra));
        }

        #[test]
        fn ratio_ignores_length_scale(num in 1i64..20, den in 1i64..5, starts in prop::collection::vec(0i64..3, 2..5)) {
            let build = |time: Rat| {
                let net = Arc::new(make_grid_with(2, 3, int(1), time, FundamentalDiagram::default()).unwrap());
                let vehicles = starts
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| Vehicle::new(i as u32, NodeId(0), NodeId(5 - i as u32 % 2), int(t), int(100)))
                    .collect();
                Instance::new(net, vehicles, int(0), rat(1, 10), int(0)).unwrap()
            };
            let a = build(int(1));
            let b = build(rat(num, den));
            let pa = crate::adhoc::simulate_opportunistic(&a).unwrap();
            let pb = crate::adhoc::simulate_opportunistic(&b).unwrap();
            let econ = EconomicParams::default();
            let ra = vmt_ratio(&pa, a.network(), &econ, Scope::Aggregate).unwrap();
            let rb = vmt_ratio(&pb, b.network(), &econ, Scope::Aggregate).unwrap();
            prop_assert_eq!(ra.clone(), rb);
            prop_assert!(ra[0] >= int(0) && ra[0] <= int(1));
            prop_assert_eq!(ra[0].is_zero(), pa.platoons.is_empty());
        }
    }
}
