//! Exhaustive enumeration for small instances, written without the search
//! space used by the other solvers so the two can check each other.

use std::collections::HashMap;

use num_traits::Zero;

use super::SolverConfig;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::network::{EdgeId, Path};
use crate::plan::{Plan, SolveStatus};
use crate::rational::{int, Rat};

pub const MAX_VEHICLES: usize = 4;
pub const MAX_PATHS: usize = 50;
pub const MAX_DELAY_POINTS: usize = 41;
pub const MAX_COMBINATIONS: u64 = 2_000_000;

struct Candidate<'a> {
    path: &'a Path,
    delay: Rat,
}

pub fn solve_oracle(inst: &Instance, cfg: &SolverConfig) -> Result<Plan> {
    cfg.validate()?;
    if inst.len() > MAX_VEHICLES {
        return Err(Error::Oversized(format!(
            "{} vehicles, oracle takes at most {MAX_VEHICLES}",
            inst.len()
        )));
    }
    let net = inst.network();
    let step = cfg.delay_resolution;
    let points = (inst.max_wait() / step).floor().to_integer() + 1;
    if points > MAX_DELAY_POINTS as i64 {
        return Err(Error::Oversized(format!(
            "{points} delay points, oracle takes at most {MAX_DELAY_POINTS}"
        )));
    }

    let mut ids: Vec<usize> = (0..inst.len()).collect();
    ids.sort_by_key(|&k| inst.vehicles()[k].id);

    let mut path_sets = Vec::with_capacity(inst.len());
    for v in inst.vehicles() {
        let paths = net.bounded_paths(v.origin, v.destination, inst.detour_factor())?;
        if paths.len() > MAX_PATHS {
            return Err(Error::Oversized(format!(
                "vehicle {} has {} bounded paths, oracle takes at most {MAX_PATHS}",
                v.id,
                paths.len()
            )));
        }
        path_sets.push(paths);
    }

    // options per vehicle in (delay, node sequence) order
    let mut options: Vec<Vec<Candidate>> = Vec::with_capacity(inst.len());
    let mut combinations: u64 = 1;
    for (k, v) in inst.vehicles().iter().enumerate() {
        let mut by_nodes: Vec<&Path> = path_sets[k].iter().collect();
        by_nodes.sort_by(|a, b| a.nodes.cmp(&b.nodes));
        let mut list = Vec::new();
        for i in 0..points {
            let delay = step * int(i);
            for &path in &by_nodes {
                if v.earliest_departure + delay + path.total_time <= v.deadline {
                    list.push(Candidate { path, delay });
                }
            }
        }
        if list.is_empty() {
            return Err(Error::Infeasible(format!(
                "vehicle {} cannot meet its deadline",
                v.id
            )));
        }
        combinations = combinations.saturating_mul(list.len() as u64);
        options.push(list);
    }
    if combinations > MAX_COMBINATIONS {
        return Err(Error::Oversized(format!(
            "{combinations} combinations, oracle takes at most {MAX_COMBINATIONS}"
        )));
    }

    let evaluate = |pick: &[usize]| -> Rat {
        let mut total = Rat::zero();
        let mut entries: HashMap<(EdgeId, Rat), (Rat, u32)> = HashMap::new();
        for (k, v) in inst.vehicles().iter().enumerate() {
            let o = &options[k][pick[k]];
            total += o.path.total_cost + inst.wait_cost(k) * o.delay;
            let mut t = v.earliest_departure + o.delay;
            for &id in &o.path.edges {
                let e = net.edge(id);
                if v.platoon_capable {
                    entries.entry((id, t)).or_insert((e.cost, 0)).1 += 1;
                }
                t += e.time;
            }
        }
        for (cost, count) in entries.into_values() {
            if count > 1 {
                total -= inst.eta() * cost * int(count as i64 - 1);
            }
        }
        total
    };

    // odometer, smallest vehicle id most significant
    let mut pick = vec![0usize; inst.len()];
    let mut best: Option<(Rat, Vec<usize>)> = None;
    'combos: loop {
        let value = evaluate(&pick);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, pick.clone()));
        }
        for &k in ids.iter().rev() {
            pick[k] += 1;
            if pick[k] < options[k].len() {
                continue 'combos;
            }
            pick[k] = 0;
        }
        break;
    }

    let (value, pick) = best.expect("at least one combination");
    let schedule: Vec<(&Path, Rat)> = pick
        .iter()
        .enumerate()
        .map(|(k, &i)| (options[k][i].path, options[k][i].delay))
        .collect();
    let plan = Plan::from_schedule(inst, &schedule, SolveStatus::Optimal)?;
    if plan.objective != value {
        return Err(Error::Infeasible(format!(
            "oracle objective {value} disagrees with plan {}",
            plan.objective
        )));
    }
    Ok(plan)
}
