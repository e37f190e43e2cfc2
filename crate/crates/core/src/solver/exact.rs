//! Depth-first branch-and-bound over per-vehicle (route, delay) choices.
//!
//! Vehicles are fixed one at a time, longest trips first. Placing a vehicle
//! costs its route plus waiting cost, less `eta * C` on every shared cell
//! already occupied by an earlier vehicle. Later arrivals never change what
//! earlier ones pay, so the cost of a partial assignment is exact.
//!
//! Lower bound for the unfixed vehicles: each pays at least its cheapest
//! choice, counting a saving only on cells that some vehicle placed before it
//! (fixed, or unfixed but earlier in the order) could occupy.

use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::heuristic;
use super::space::{Choice, Occupancy, SearchSpace};
use super::SolverConfig;
use crate::error::Result;
use crate::instance::Instance;
use crate::plan::{Plan, SolveStatus};

const CLOCK_INTERVAL: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchStats {
    pub nodes: u64,
    pub completed: bool,
}

struct Shared {
    best: AtomicI64,
    incumbent: Mutex<Vec<u32>>,
    nodes: AtomicU64,
    stop: AtomicBool,
}

struct Bounds<'s> {
    space: &'s SearchSpace<'s>,
    /// Vehicle index at each search position.
    order: Vec<usize>,
    /// Static lower bound suffix sums: `rest[d]` bounds positions `d..`.
    rest: Vec<i64>,
    /// Bit `k` set when the vehicle at position `k` can reach the cell.
    reach_mask: Option<Vec<u128>>,
}

impl<'s> Bounds<'s> {
    fn new(space: &'s SearchSpace<'s>) -> Self {
        let inst = space.inst;
        let mut order: Vec<usize> = (0..space.vehicle_count()).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (inst.shortest_path(a), inst.shortest_path(b));
            pb.total_cost
                .cmp(&pa.total_cost)
                .then(inst.vehicles()[a].id.cmp(&inst.vehicles()[b].id))
        });
        let n = order.len();
        let mut first_reach = vec![usize::MAX; space.cell_count];
        let mut mask = (n <= 128).then(|| vec![0u128; space.cell_count]);
        for (pos, &k) in order.iter().enumerate() {
            for c in &space.choices[k] {
                for &(cell, _) in &c.cells {
                    let slot = &mut first_reach[cell as usize];
                    *slot = (*slot).min(pos);
                    if let Some(m) = mask.as_mut() {
                        m[cell as usize] |= 1u128 << pos;
                    }
                }
            }
        }
        let mut rest = vec![0i64; n + 1];
        for pos in (0..n).rev() {
            let k = order[pos];
            let lb = space.choices[k]
                .iter()
                .map(|c| {
                    c.base
                        - c.cells
                            .iter()
                            .filter(|(cell, _)| first_reach[*cell as usize] < pos)
                            .map(|(_, s)| s)
                            .sum::<i64>()
                })
                .min()
                .unwrap_or(0);
            rest[pos] = rest[pos + 1] + lb;
        }
        Bounds {
            space,
            order,
            rest,
            reach_mask: mask,
        }
    }

    /// Bound for positions `depth..` given the current occupancy.
    fn dynamic(&self, depth: usize, occ: &Occupancy) -> i64 {
        let Some(mask) = &self.reach_mask else {
            return self.rest[depth];
        };
        let mut total = 0;
        for pos in depth..self.order.len() {
            let earlier: u128 = if pos == 0 {
                0
            } else {
                (u128::MAX >> (128 - pos)) & !((1u128 << depth) - 1)
            };
            let k = self.order[pos];
            let lb = self.space.choices[k]
                .iter()
                .map(|c| {
                    c.base
                        - c.cells
                            .iter()
                            .filter(|(cell, _)| {
                                occ.occupied(*cell) || mask[*cell as usize] & earlier != 0
                            })
                            .map(|(_, s)| s)
                            .sum::<i64>()
                })
                .min()
                .unwrap_or(0);
            total += lb;
        }
        total
    }
}

struct Worker<'s> {
    bounds: &'s Bounds<'s>,
    shared: &'s Shared,
    occ: Occupancy,
    picks: Vec<u32>,
    scratch: Vec<Vec<(i64, u32)>>,
    local_nodes: u64,
    deadline: Instant,
    node_limit: Option<u64>,
}

impl<'s> Worker<'s> {
    fn new(
        bounds: &'s Bounds<'s>,
        shared: &'s Shared,
        deadline: Instant,
        node_limit: Option<u64>,
    ) -> Self {
        let n = bounds.order.len();
        Worker {
            bounds,
            shared,
            occ: Occupancy::new(bounds.space.cell_count),
            picks: vec![0; n],
            scratch: vec![Vec::new(); n],
            local_nodes: 0,
            deadline,
            node_limit,
        }
    }

    fn choice(&self, pos: usize, idx: u32) -> &'s Choice {
        &self.bounds.space.choices[self.bounds.order[pos]][idx as usize]
    }

    fn tick(&mut self) -> bool {
        self.local_nodes += 1;
        if self.local_nodes.is_multiple_of(CLOCK_INTERVAL) {
            let total = self
                .shared
                .nodes
                .fetch_add(CLOCK_INTERVAL, Ordering::Relaxed)
                + CLOCK_INTERVAL;
            if Instant::now() >= self.deadline || self.node_limit.is_some_and(|lim| total >= lim) {
                self.shared.stop.store(true, Ordering::Relaxed);
            }
        }
        self.shared.stop.load(Ordering::Relaxed)
    }

    fn offer(&self, cost: i64) {
        if cost >= self.shared.best.load(Ordering::Acquire) {
            return;
        }
        let mut incumbent = self.shared.incumbent.lock().expect("incumbent lock");
        if cost < self.shared.best.load(Ordering::Acquire) {
            let space = self.bounds.space;
            let mut by_vehicle = vec![0u32; space.vehicle_count()];
            for (pos, &k) in self.bounds.order.iter().enumerate() {
                by_vehicle[k] = self.picks[pos];
            }
            *incumbent = by_vehicle;
            self.shared.best.store(cost, Ordering::Release);
        }
    }

    /// Children of `depth` sorted by increment, then by choice index.
    fn children(&mut self, depth: usize) -> Vec<(i64, u32)> {
        let mut list = std::mem::take(&mut self.scratch[depth]);
        list.clear();
        let k = self.bounds.order[depth];
        for (i, c) in self.bounds.space.choices[k].iter().enumerate() {
            list.push((self.occ.increment(c), i as u32));
        }
        list.sort_unstable();
        list
    }

    fn dfs(&mut self, depth: usize, fixed: i64) {
        if self.tick() {
            return;
        }
        let n = self.bounds.order.len();
        if depth == n {
            self.offer(fixed);
            return;
        }
        let best = self.shared.best.load(Ordering::Acquire);
        if fixed + self.bounds.rest[depth] >= best {
            return;
        }
        if depth > 0 && fixed + self.bounds.dynamic(depth, &self.occ) >= best {
            return;
        }
        let children = self.children(depth);
        for &(inc, idx) in &children {
            let best = self.shared.best.load(Ordering::Acquire);
            if fixed + inc + self.bounds.rest[depth + 1] >= best {
                break;
            }
            let c = self.choice(depth, idx);
            self.picks[depth] = idx;
            self.occ.place(c);
            self.dfs(depth + 1, fixed + inc);
            self.occ.remove(c);
            if self.shared.stop.load(Ordering::Relaxed) {
                break;
            }
        }
        self.scratch[depth] = children;
    }
}

/// Branch-and-bound seeded with the heuristic's plan. Returns the plan and search statistics.
pub fn solve_exact_with_stats(inst: &Instance, cfg: &SolverConfig) -> Result<(Plan, SearchStats)> {
    cfg.validate()?;
    let started = Instant::now();
    let deadline = started + cfg.time_limit;
    let space = SearchSpace::build(inst, cfg.delay_resolution)?;
    if space.vehicle_count() == 0 {
        return Ok((
            space.plan(&[], 0, SolveStatus::Optimal)?,
            SearchStats {
                nodes: 0,
                completed: true,
            },
        ));
    }
    let (seed_cost, seed_picks) = heuristic::search(&space, cfg.seed, deadline);
    let bounds = Bounds::new(&space);
    log::debug!(
        "exact: {} vehicles, {} shared cells, up to {} choices, root bound {}, incumbent {}",
        space.vehicle_count(),
        space.cell_count,
        space.largest_choice_set(),
        bounds.rest[0],
        seed_cost
    );
    let shared = Shared {
        best: AtomicI64::new(seed_cost),
        incumbent: Mutex::new(seed_picks),
        nodes: AtomicU64::new(0),
        stop: AtomicBool::new(false),
    };
    if bounds.rest[0] < seed_cost {
        let workers = cfg.workers.max(1);
        if workers == 1 {
            let mut w = Worker::new(&bounds, &shared, deadline, cfg.node_limit);
            w.dfs(0, 0);
            shared
                .nodes
                .fetch_add(w.local_nodes % CLOCK_INTERVAL, Ordering::Relaxed);
        } else {
            let root_children = Worker::new(&bounds, &shared, deadline, cfg.node_limit).children(0);
            let next = AtomicUsize::new(0);
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| {
                        let mut w = Worker::new(&bounds, &shared, deadline, cfg.node_limit);
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            let Some(&(inc, idx)) = root_children.get(i) else {
                                break;
                            };
                            if shared.stop.load(Ordering::Relaxed) {
                                break;
                            }
                            if inc + bounds.rest[1] >= shared.best.load(Ordering::Acquire) {
                                continue;
                            }
                            let c = w.choice(0, idx);
                            w.picks[0] = idx;
                            w.occ.place(c);
                            w.dfs(1, inc);
                            w.occ.remove(c);
                        }
                        shared
                            .nodes
                            .fetch_add(w.local_nodes % CLOCK_INTERVAL, Ordering::Relaxed);
                    });
                }
            });
        }
    }
    let completed = !shared.stop.load(Ordering::Relaxed);
    let status = if completed {
        SolveStatus::Optimal
    } else {
        SolveStatus::TimeLimitBest
    };
    let best = shared.best.load(Ordering::Acquire);
    let picks = shared.incumbent.into_inner().expect("incumbent lock");
    let stats = SearchStats {
        nodes: shared.nodes.load(Ordering::Relaxed),
        completed,
    };
    log::debug!(
        "exact: {:?} after {:?}, objective {}",
        stats,
        started.elapsed(),
        space.to_rat(best)
    );
    Ok((space.plan(&picks, best, status)?, stats))
}

pub fn solve_exact(inst: &Instance, cfg: &SolverConfig) -> Result<Plan> {
    solve_exact_with_stats(inst, cfg).map(|(plan, _)| plan)
}
