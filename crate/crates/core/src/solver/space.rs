//! Discrete search space shared by the branch-and-bound and the heuristic.
//!
//! Each vehicle gets a list of choices, one per (route, delay) pair that
//! respects the detour bound, the delay grid and the deadline. Costs are
//! scaled to integers and entry times to integer ticks so the inner loops
//! stay in machine arithmetic.
//!
//! A "cell" is an (edge, entry tick) pair that two or more platoon-capable
//! vehicles can occupy. Cells nobody else can reach never yield a saving, so
//! they are folded into the choice's base cost. Choices with the same base
//! cost and the same cells behave identically for every vehicle and are kept
//! once, preferring the smallest delay and then the smallest node sequence.

use std::collections::HashMap;

use num_integer::Integer;
use num_traits::Zero;

use crate::error::{invalid, Error, Result};
use crate::instance::Instance;
use crate::network::{EdgeId, Path};
use crate::plan::{Plan, SolveStatus};
use crate::rational::{common_denominator, Rat};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Choice {
    pub path: u32,
    pub delay_steps: u32,
    /// Scaled route cost plus scaled waiting cost.
    pub base: i64,
    /// Shared cells with the scaled saving earned when someone is already there.
    pub cells: Vec<(u32, i64)>,
}

pub(crate) struct SearchSpace<'a> {
    pub inst: &'a Instance,
    pub paths: Vec<Vec<Path>>,
    pub choices: Vec<Vec<Choice>>,
    pub cell_count: usize,
    /// Objective = scaled total / scale.
    pub scale: i64,
    pub delay_step: Rat,
    /// Choice equivalent to departing on time along the shortest path.
    pub baseline: Vec<u32>,
}

impl<'a> SearchSpace<'a> {
    pub fn build(inst: &'a Instance, delay_step: Rat) -> Result<Self> {
        if delay_step <= Rat::zero() {
            return Err(invalid("delay resolution must be positive"));
        }
        let net = inst.network();
        let eta = inst.eta();
        let max_steps = (inst.max_wait() / delay_step).floor().to_integer();
        let max_steps = u32::try_from(max_steps).map_err(|_| invalid("delay grid too large"))?;

        let tick_den = common_denominator(
            net.edges()
                .iter()
                .map(|e| e.time)
                .chain(inst.vehicles().iter().map(|v| v.earliest_departure))
                .chain([delay_step]),
        );
        let mut scale = common_denominator(net.edges().iter().flat_map(|e| [e.cost, e.cost * eta]));
        for k in 0..inst.len() {
            scale = scale.lcm((inst.wait_cost(k) * delay_step).denom());
        }
        let to_i64 = |r: Rat| -> Result<i64> {
            let v = r * Rat::from_integer(scale);
            if v.is_integer() {
                Ok(v.to_integer())
            } else {
                Err(invalid("cost scaling failed"))
            }
        };
        let tick = |r: Rat| -> i64 { (r * Rat::from_integer(tick_den)).to_integer() };
        let edge_cost: Vec<i64> = net
            .edges()
            .iter()
            .map(|e| to_i64(e.cost))
            .collect::<Result<_>>()?;
        let edge_save: Vec<i64> = net
            .edges()
            .iter()
            .map(|e| to_i64(e.cost * eta))
            .collect::<Result<_>>()?;
        let edge_ticks: Vec<i64> = net.edges().iter().map(|e| tick(e.time)).collect();
        let step_ticks = tick(delay_step);

        let factor = inst.detour_factor();
        let mut paths = Vec::with_capacity(inst.len());
        let mut windows = Vec::with_capacity(inst.len());
        for v in inst.vehicles() {
            let budget = v.deadline - v.earliest_departure;
            let fitting: Vec<Path> = net
                .bounded_paths(v.origin, v.destination, factor)?
                .into_iter()
                .filter(|p| p.total_time <= budget)
                .collect();
            if fitting.is_empty() {
                return Err(Error::Infeasible(format!(
                    "vehicle {} has no route meeting its deadline",
                    v.id
                )));
            }
            let steps: Vec<u32> = fitting
                .iter()
                .map(|p| {
                    let slack = ((budget - p.total_time) / delay_step).floor().to_integer();
                    slack.clamp(0, max_steps as i64) as u32
                })
                .collect();
            paths.push(fitting);
            windows.push(steps);
        }

        // cells reachable by two or more platoon-capable vehicles
        let mut reach: HashMap<(EdgeId, i64), (usize, u32)> = HashMap::new();
        for (k, v) in inst.vehicles().iter().enumerate() {
            if !v.platoon_capable {
                continue;
            }
            let start = tick(v.earliest_departure);
            for (path, &steps) in paths[k].iter().zip(&windows[k]) {
                let mut offset = start;
                for &id in &path.edges {
                    for d in 0..=steps as i64 {
                        let entry = reach.entry((id, offset + d * step_ticks)).or_insert((k, 0));
                        if entry.1 == 0 || entry.0 != k {
                            entry.0 = k;
                            entry.1 += 1;
                        }
                    }
                    offset += edge_ticks[id.index()];
                }
            }
        }
        let mut cell_ids: HashMap<(EdgeId, i64), u32> = HashMap::new();
        let mut shared: Vec<(EdgeId, i64)> = reach
            .into_iter()
            .filter(|(_, (_, n))| *n >= 2)
            .map(|(key, _)| key)
            .collect();
        shared.sort_unstable();
        for (i, key) in shared.into_iter().enumerate() {
            cell_ids.insert(key, i as u32);
        }

        let mut choices = Vec::with_capacity(inst.len());
        let mut baseline = Vec::with_capacity(inst.len());
        for (k, v) in inst.vehicles().iter().enumerate() {
            let wait_rate = inst.wait_cost(k) * delay_step;
            let wait_unit = to_i64(wait_rate)?;
            let start = tick(v.earliest_departure);
            // enumerate by delay, then by node sequence
            let mut by_nodes: Vec<usize> = (0..paths[k].len()).collect();
            by_nodes.sort_by(|&a, &b| paths[k][a].nodes.cmp(&paths[k][b].nodes));
            let mut seen: HashMap<(i64, Vec<(u32, i64)>), u32> = HashMap::new();
            let mut list = Vec::new();
            let mut on_time = None;
            let max_d = windows[k].iter().copied().max().unwrap_or(0);
            for d in 0..=max_d {
                for &p in &by_nodes {
                    if d > windows[k][p] {
                        continue;
                    }
                    let path = &paths[k][p];
                    let mut base = wait_unit * d as i64;
                    let mut cells = Vec::new();
                    let mut offset = start + d as i64 * step_ticks;
                    for &id in &path.edges {
                        base += edge_cost[id.index()];
                        if v.platoon_capable {
                            if let Some(&c) = cell_ids.get(&(id, offset)) {
                                cells.push((c, edge_save[id.index()]));
                            }
                        }
                        offset += edge_ticks[id.index()];
                    }
                    cells.sort_unstable();
                    let next = list.len() as u32;
                    let idx = *seen.entry((base, cells.clone())).or_insert(next);
                    if idx == next {
                        list.push(Choice {
                            path: p as u32,
                            delay_steps: d,
                            base,
                            cells,
                        });
                    }
                    // path 0 is the shortest path: bounded paths sort by (cost, nodes)
                    if d == 0 && p == 0 {
                        on_time = Some(idx);
                    }
                }
            }
            debug_assert_eq!(paths[k][0].nodes, inst.shortest_path(k).nodes);
            baseline.push(on_time.expect("on-time shortest route always meets the deadline"));
            choices.push(list);
        }
        Ok(SearchSpace {
            inst,
            paths,
            choices,
            cell_count: cell_ids.len(),
            scale,
            delay_step,
            baseline,
        })
    }

    pub fn to_rat(&self, scaled: i64) -> Rat {
        Rat::new(scaled, self.scale)
    }

    /// Turns one choice index per vehicle into a plan and cross-checks its objective.
    pub fn plan(&self, picks: &[u32], scaled: i64, status: SolveStatus) -> Result<Plan> {
        let delays: Vec<Rat> = picks
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                self.delay_step * Rat::from_integer(self.choices[k][c as usize].delay_steps as i64)
            })
            .collect();
        let schedule: Vec<(&Path, Rat)> = picks
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                (
                    &self.paths[k][self.choices[k][c as usize].path as usize],
                    delays[k],
                )
            })
            .collect();
        let plan = Plan::from_schedule(self.inst, &schedule, status)?;
        if plan.objective != self.to_rat(scaled) {
            return Err(Error::Infeasible(format!(
                "internal objective mismatch: search {} vs plan {}",
                self.to_rat(scaled),
                plan.objective
            )));
        }
        Ok(plan)
    }

    pub fn vehicle_count(&self) -> usize {
        self.choices.len()
    }

    pub fn largest_choice_set(&self) -> usize {
        self.choices.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Occupancy of shared cells: how many placed vehicles sit in each.
pub(crate) struct Occupancy {
    counts: Vec<u32>,
}

impl Occupancy {
    pub fn new(cells: usize) -> Self {
        Occupancy {
            counts: vec![0; cells],
        }
    }

    /// Scaled cost of adding `choice` given the vehicles already placed.
    pub fn increment(&self, choice: &Choice) -> i64 {
        let mut cost = choice.base;
        for &(c, save) in &choice.cells {
            if self.counts[c as usize] > 0 {
                cost -= save;
            }
        }
        cost
    }

    pub fn place(&mut self, choice: &Choice) {
        for &(c, _) in &choice.cells {
            self.counts[c as usize] += 1;
        }
    }

    pub fn remove(&mut self, choice: &Choice) {
        for &(c, _) in &choice.cells {
            self.counts[c as usize] -= 1;
        }
    }

    pub fn occupied(&self, cell: u32) -> bool {
        self.counts[cell as usize] > 0
    }
}
