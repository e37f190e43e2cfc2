//! Greedy insertion followed by one-vehicle-at-a-time local search.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::space::{Occupancy, SearchSpace};
use super::SolverConfig;
use crate::error::Result;
use crate::instance::Instance;
use crate::plan::{Plan, SolveStatus};

const RESTARTS: usize = 6;

/// Scaled objective of one choice per vehicle.
pub(crate) fn total_cost(space: &SearchSpace<'_>, picks: &[u32]) -> i64 {
    let mut occ = Occupancy::new(space.cell_count);
    let mut total = 0;
    for (k, &c) in picks.iter().enumerate() {
        let choice = &space.choices[k][c as usize];
        total += occ.increment(choice);
        occ.place(choice);
    }
    total
}

fn best_choice(space: &SearchSpace<'_>, occ: &Occupancy, k: usize) -> (i64, u32) {
    space.choices[k]
        .iter()
        .enumerate()
        .map(|(i, c)| (occ.increment(c), i as u32))
        .min()
        .expect("every vehicle has a choice")
}

fn greedy(space: &SearchSpace<'_>, order: &[usize]) -> Vec<u32> {
    let mut occ = Occupancy::new(space.cell_count);
    let mut picks = vec![0u32; space.vehicle_count()];
    for &k in order {
        let (_, c) = best_choice(space, &occ, k);
        picks[k] = c;
        occ.place(&space.choices[k][c as usize]);
    }
    picks
}

/// Re-place one vehicle at a time at its cheapest choice until nothing improves.
fn local_search(space: &SearchSpace<'_>, picks: &mut [u32], deadline: Instant) -> i64 {
    let mut occ = Occupancy::new(space.cell_count);
    for (k, &c) in picks.iter().enumerate() {
        occ.place(&space.choices[k][c as usize]);
    }
    let mut total = total_cost(space, picks);
    loop {
        let mut improved = false;
        for k in 0..picks.len() {
            let current = &space.choices[k][picks[k] as usize];
            occ.remove(current);
            let now = occ.increment(current);
            let (cost, c) = best_choice(space, &occ, k);
            if cost < now {
                picks[k] = c;
                total += cost - now;
                improved = true;
            }
            occ.place(&space.choices[k][picks[k] as usize]);
        }
        if !improved || Instant::now() >= deadline {
            break;
        }
    }
    debug_assert_eq!(total, total_cost(space, picks));
    total
}

/// Best of: the on-time baseline, greedy in longest-trip order, and a few
/// shuffled greedy orders, each polished by local search.
pub(crate) fn search(space: &SearchSpace<'_>, seed: u64, deadline: Instant) -> (i64, Vec<u32>) {
    let inst = space.inst;
    let n = space.vehicle_count();
    let mut starts = vec![space.baseline.clone()];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        inst.shortest_path(b)
            .total_cost
            .cmp(&inst.shortest_path(a).total_cost)
            .then(inst.vehicles()[a].id.cmp(&inst.vehicles()[b].id))
    });
    starts.push(greedy(space, &order));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(i64, Vec<u32>)> = None;
    for round in 0..RESTARTS + 2 {
        let mut picks = if round < starts.len() {
            starts[round].clone()
        } else {
            if n < 2 || Instant::now() >= deadline {
                break;
            }
            order.shuffle(&mut rng);
            greedy(space, &order)
        };
        let cost = local_search(space, &mut picks, deadline);
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, picks));
        }
    }
    best.expect("at least one start")
}

pub fn solve_heuristic(inst: &Instance, cfg: &SolverConfig) -> Result<Plan> {
    cfg.validate()?;
    let deadline = Instant::now() + cfg.time_limit;
    let space = SearchSpace::build(inst, cfg.delay_resolution)?;
    let (cost, picks) = search(&space, cfg.seed, deadline);
    space.plan(&picks, cost, SolveStatus::Heuristic)
}
