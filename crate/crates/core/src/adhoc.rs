//! Uncoordinated baseline: every vehicle leaves on time along its shortest
//! path and platoons with whoever happens to enter a link next to it.
//!
//! Links are free-flow by default. With `congestion` on, each link also acts
//! as a bottleneck whose capacity grows with the share of platooning vehicles,
//! and entry is held back by Newell's storage condition.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::Path as FsPath;

use num_traits::{One, Zero};

use crate::error::{invalid, Error, Result};
use crate::instance::{Instance, VehicleId};
use crate::network::EdgeId;
use crate::plan::{Plan, PlatoonGroup, SolveStatus, VehiclePlan};
use crate::rational::{int, parse, Rat};

pub use crate::network::FundamentalDiagram;

/// Cumulative records of one link. Vehicle index `n` counts entrants from 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkState {
    pub edge: EdgeId,
    /// (vehicle, entry time at the upstream end) in entry order.
    pub entries: Vec<(VehicleId, Rat)>,
    /// Exit times at the downstream end, same indexing as `entries`.
    pub exits: Vec<Rat>,
    /// Maximal runs of consecutive platoon-capable entrants, as entry indices.
    pub runs: Vec<Vec<usize>>,
    /// Current capacity, veh/h.
    pub capacity: Rat,
}

impl LinkState {
    pub fn new(edge: EdgeId, capacity: Rat) -> Self {
        LinkState {
            edge,
            entries: Vec::new(),
            exits: Vec::new(),
            runs: Vec::new(),
            capacity,
        }
    }

    fn exit_at(&self, m: Rat) -> Option<Rat> {
        if m < Rat::zero() {
            return None;
        }
        let lo = m.floor().to_integer() as usize;
        let frac = m.fract();
        let a = *self.exits.get(lo)?;
        if frac.is_zero() {
            return Some(a);
        }
        let b = *self.exits.get(lo + 1)?;
        Some(a + (b - a) * frac)
    }
}

/// Newell's crossing time of vehicle `n` at distance `x` km from the upstream end.
///
/// The downstream term is dropped when the exit record it needs does not exist.
pub fn newell_crossing_time(
    link: &LinkState,
    fd: &FundamentalDiagram,
    length_km: Rat,
    x: Rat,
    n: usize,
) -> Result<Rat> {
    let &(_, entry) = link.entries.get(n).ok_or_else(|| {
        invalid(format!(
            "vehicle index {n} has not entered link {}",
            link.edge.index()
        ))
    })?;
    if x < Rat::zero() || x > length_km {
        return Err(invalid(format!(
            "position {x} outside link of length {length_km}"
        )));
    }
    let minutes = int(60);
    let upstream = entry + x / fd.free_flow_speed * minutes;
    let back = length_km - x;
    let m = int(n as i64) - fd.jam_density * back;
    Ok(match link.exit_at(m) {
        Some(t) => upstream.max(t + back / fd.wave_speed * minutes),
        None => upstream,
    })
}

/// Piecewise-linear map from platooning share to capacity multiplier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorTable {
    rows: Vec<(Rat, Rat)>,
}

impl Default for FactorTable {
    fn default() -> Self {
        FactorTable::identity()
    }
}

impl FactorTable {
    pub fn new(mut rows: Vec<(Rat, Rat)>) -> Result<Self> {
        rows.sort();
        if rows.first() != Some(&(Rat::zero(), Rat::one())) {
            return Err(invalid(
                "factor table must start at share 0 with multiplier 1",
            ));
        }
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(invalid(format!("duplicate share {}", w[0].0)));
            }
            if w[1].1 < w[0].1 {
                return Err(invalid("factor table multipliers must be nondecreasing"));
            }
        }
        if rows.last().is_some_and(|r| r.0 > Rat::one()) {
            return Err(invalid("factor table shares must lie in [0, 1]"));
        }
        Ok(FactorTable { rows })
    }

    pub fn identity() -> Self {
        FactorTable {
            rows: vec![(Rat::zero(), Rat::one())],
        }
    }

    /// Identity at share 0, 2200 to 4000 veh/h at full platooning.
    pub fn full_platoon_anchor() -> Self {
        FactorTable {
            rows: vec![
                (Rat::zero(), Rat::one()),
                (Rat::one(), Rat::new(4000, 2200)),
            ],
        }
    }

    pub fn rows(&self) -> &[(Rat, Rat)] {
        &self.rows
    }

    pub fn multiplier(&self, share: Rat) -> Rat {
        let i = self.rows.partition_point(|r| r.0 <= share);
        let (s0, m0) = self.rows[i - 1];
        match self.rows.get(i) {
            Some(&(s1, m1)) => m0 + (m1 - m0) * (share - s0) / (s1 - s0),
            None => m0,
        }
    }

    /// Two columns per line (share, multiplier), separated by whitespace or a
    /// comma. Blank lines, `#` comments and a non-numeric header are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Schema(format!(
                    "factor table line {}: expected two columns",
                    i + 1
                )));
            }
            match (parse(cols[0]), parse(cols[1])) {
                (Ok(s), Ok(m)) => rows.push((s, m)),
                _ if rows.is_empty() => continue,
                _ => {
                    return Err(Error::Schema(format!(
                        "factor table line {}: not a number",
                        i + 1
                    )))
                }
            }
        }
        FactorTable::new(rows)
    }

    pub fn read(path: &FsPath) -> Result<Self> {
        FactorTable::parse(&std::fs::read_to_string(path)?)
    }
}

/// Effective capacity for the given platooning share.
pub fn adjust_capacity(
    fd: &FundamentalDiagram,
    platoon_share: Rat,
    table: &FactorTable,
) -> Result<Rat> {
    if platoon_share < Rat::zero() || platoon_share > Rat::one() {
        return Err(invalid(format!(
            "platoon share {platoon_share} outside [0, 1]"
        )));
    }
    Ok(fd.base_capacity * table.multiplier(platoon_share))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    /// Largest entry gap, minutes, that still joins the previous entrant's platoon.
    pub headway: Rat,
    pub congestion: bool,
    pub factors: FactorTable,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            headway: Rat::zero(),
            congestion: false,
            factors: FactorTable::identity(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub plan: Plan,
    /// One record per network edge, indexed by edge id.
    pub links: Vec<LinkState>,
}

/// Free-flow ad hoc platooning with exact-coincidence grouping.
pub fn simulate_opportunistic(inst: &Instance) -> Result<Plan> {
    simulate(inst, &SimConfig::default()).map(|s| s.plan)
}

pub fn simulate(inst: &Instance, cfg: &SimConfig) -> Result<Simulation> {
    if cfg.headway < Rat::zero() {
        return Err(invalid("headway must be nonnegative"));
    }
    let net = inst.network();
    let mut links: Vec<LinkState> = net
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| LinkState::new(EdgeId(i as u32), e.diagram.base_capacity))
        .collect();
    // entrants per link that belong to a run of two or more
    let mut in_platoon: Vec<usize> = vec![0; links.len()];
    let mut entry_times: Vec<Vec<Rat>> = vec![Vec::new(); inst.len()];
    let mut arrivals: Vec<Rat> = vec![Rat::zero(); inst.len()];

    let mut events = BinaryHeap::new();
    for (k, v) in inst.vehicles().iter().enumerate() {
        events.push(Reverse((v.earliest_departure, v.id, k, 0usize)));
    }
    while let Some(Reverse((time, _, k, hop))) = events.pop() {
        let v = &inst.vehicles()[k];
        let path = inst.shortest_path(k);
        let Some(&id) = path.edges.get(hop) else {
            arrivals[k] = time;
            continue;
        };
        let e = net.edge(id);
        let link = &mut links[id.index()];
        let n = link.entries.len();
        link.entries.push((v.id, time));
        let mut entry = time;
        if cfg.congestion {
            entry = newell_crossing_time(link, &e.diagram, e.length_km(), Rat::zero(), n)?;
            link.entries[n].1 = entry;
        }

        let joins = v.platoon_capable
            && n > 0
            && link
                .runs
                .last()
                .is_some_and(|r| *r.last().unwrap() == n - 1)
            && entry - link.entries[n - 1].1 <= cfg.headway;
        if joins {
            link.runs.last_mut().unwrap().push(n);
            let len = link.runs.last().unwrap().len();
            in_platoon[id.index()] += if len == 2 { 2 } else { 1 };
        } else if v.platoon_capable {
            link.runs.push(vec![n]);
        }

        let mut exit = entry + e.time;
        if cfg.congestion {
            let share = Rat::new(in_platoon[id.index()] as i64, n as i64 + 1);
            link.capacity = adjust_capacity(&e.diagram, share, &cfg.factors)?;
            if let Some(&last) = link.exits.last() {
                if link.capacity > Rat::zero() {
                    exit = exit.max(last + int(60) / link.capacity);
                }
                exit = exit.max(last);
            }
        }
        link.exits.push(exit);
        entry_times[k].push(entry);
        events.push(Reverse((exit, v.id, k, hop + 1)));
    }

    let vehicles = inst
        .vehicles()
        .iter()
        .enumerate()
        .map(|(k, v)| VehiclePlan {
            vehicle: v.id,
            route: inst.shortest_path(k).nodes.clone(),
            delay: Rat::zero(),
            entry_times: std::mem::take(&mut entry_times[k]),
            arrival: arrivals[k],
        })
        .collect();
    let mut platoons = Vec::new();
    for link in &links {
        let e = net.edge(link.edge);
        for run in link.runs.iter().filter(|r| r.len() >= 2) {
            let (leader, entry_time) = link.entries[run[0]];
            let mut members: Vec<VehicleId> = run.iter().map(|&i| link.entries[i].0).collect();
            members.sort();
            platoons.push(PlatoonGroup {
                from: e.from,
                to: e.to,
                entry_time,
                leader,
                members,
            });
        }
    }
    platoons.sort_by_key(|g| (g.from, g.to, g.entry_time));
    let plan = Plan::assemble(inst, vehicles, platoons, SolveStatus::Simulated)?;
    Ok(Simulation { plan, links })
}
