//! The coordinated-platooning model.
//!
//! Variables:
//! - `f[v,e]` binary, vehicle `v` uses edge `e`;
//! - `q[v,w,e]` binary, `v` follows `w` on `e`;
//! - `t[v]` departure delay in `[0, p]`;
//! - `s[v,e]` entry time of `v` on `e`.
//!
//! Objective: `sum C[e] * (f[v,e] - eta * sum_w q[v,w,e]) + sum eps[v] * t[v]`.
//!
//! Only variables that can take a nonzero value in some feasible plan are
//! generated. A flow variable needs the edge to lie on a route within the
//! detour bound that also meets the deadline; a follow variable needs both
//! vehicles' entry windows on the edge to intersect.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::instance::{Instance, VehicleId};
use crate::network::{EdgeId, NodeId, Path};
use crate::plan::{edge_of, Plan};
use crate::rational::{int, to_f64, Rat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowVar {
    pub vehicle: usize,
    pub edge: EdgeId,
    /// Earliest and latest possible entry time onto the edge.
    pub earliest_entry: Rat,
    pub latest_entry: Rat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FollowVar {
    pub follower: usize,
    pub leader: usize,
    pub edge: EdgeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Flow(usize),
    Follow(usize),
    Delay(usize),
    Entry(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(Var, Rat)>,
    pub sense: Sense,
    pub rhs: Rat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelSize {
    pub flow: usize,
    pub follow: usize,
    pub delay: usize,
    pub entry: usize,
    pub constraints: usize,
}

#[derive(Debug, Clone)]
pub struct CoordinationModel {
    instance: Instance,
    flows: Vec<FlowVar>,
    follows: Vec<FollowVar>,
    flow_index: HashMap<(usize, EdgeId), usize>,
    follow_index: HashMap<(usize, usize, EdgeId), usize>,
    /// Routes per vehicle that respect the detour bound and the deadline.
    routes: Vec<Vec<Path>>,
    constraints: Vec<LinearConstraint>,
    big_m: Rat,
}

/// Values for every variable of a [`CoordinationModel`], in the model's order.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub flow: Vec<bool>,
    pub follow: Vec<bool>,
    pub delay: Vec<Rat>,
    /// Entry time per flow variable; meaningful only where the flow is active.
    pub entry: Vec<Rat>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    FlowConservation {
        vehicle: VehicleId,
        detail: String,
    },
    DelayBound {
        vehicle: VehicleId,
        delay: Rat,
        max_wait: Rat,
    },
    Departure {
        vehicle: VehicleId,
        expected: Rat,
        actual: Rat,
    },
    Progression {
        vehicle: VehicleId,
        edge: (NodeId, NodeId),
        expected: Rat,
        actual: Rat,
    },
    Deadline {
        vehicle: VehicleId,
        arrival: Rat,
        deadline: Rat,
    },
    FollowWithoutFlow {
        follower: VehicleId,
        leader: VehicleId,
        edge: (NodeId, NodeId),
    },
    Synchronization {
        follower: VehicleId,
        leader: VehicleId,
        edge: (NodeId, NodeId),
    },
    MultipleLeaders {
        vehicle: VehicleId,
        edge: (NodeId, NodeId),
    },
    LeaderCount {
        edge: (NodeId, NodeId),
        members: Vec<VehicleId>,
        leaders: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FlowConservation { vehicle, detail } => {
                write!(f, "vehicle {vehicle}: broken route ({detail})")
            }
            Violation::DelayBound {
                vehicle,
                delay,
                max_wait,
            } => {
                write!(
                    f,
                    "vehicle {vehicle}: delay {delay} outside [0, {max_wait}]"
                )
            }
            Violation::Departure {
                vehicle,
                expected,
                actual,
            } => {
                write!(
                    f,
                    "vehicle {vehicle}: departs at {actual}, expected {expected}"
                )
            }
            Violation::Progression {
                vehicle,
                edge,
                expected,
                actual,
            } => write!(
                f,
                "vehicle {vehicle}: enters {}->{} at {actual}, expected {expected}",
                edge.0, edge.1
            ),
            Violation::Deadline {
                vehicle,
                arrival,
                deadline,
            } => {
                write!(
                    f,
                    "vehicle {vehicle}: arrives at {arrival} after deadline {deadline}"
                )
            }
            Violation::FollowWithoutFlow {
                follower,
                leader,
                edge,
            } => write!(
                f,
                "q({follower},{leader},{}->{}) active but a vehicle is not on the edge",
                edge.0, edge.1
            ),
            Violation::Synchronization {
                follower,
                leader,
                edge,
            } => write!(
                f,
                "q({follower},{leader},{}->{}) active with unequal entry times",
                edge.0, edge.1
            ),
            Violation::MultipleLeaders { vehicle, edge } => {
                write!(
                    f,
                    "vehicle {vehicle} follows more than one vehicle on {}->{}",
                    edge.0, edge.1
                )
            }
            Violation::LeaderCount {
                edge,
                members,
                leaders,
            } => write!(
                f,
                "platoon {members:?} on {}->{} has {leaders} leaders",
                edge.0, edge.1
            ),
        }
    }
}

/// Builds the pruned model for `inst`.
pub fn generate_variables(inst: &Instance) -> Result<CoordinationModel> {
    let net = inst.network();
    let factor = inst.detour_factor();
    let mut routes = Vec::with_capacity(inst.len());
    let mut windows: BTreeMap<(usize, EdgeId), (Rat, Rat)> = BTreeMap::new();

    for (k, v) in inst.vehicles().iter().enumerate() {
        let budget = v.deadline - v.earliest_departure;
        let fitting: Vec<Path> = net
            .bounded_paths(v.origin, v.destination, factor)?
            .into_iter()
            .filter(|p| p.total_time <= budget)
            .collect();
        for path in &fitting {
            let latest_delay = inst.max_wait().min(budget - path.total_time);
            let mut prefix = Rat::zero();
            for &id in &path.edges {
                let lo = v.earliest_departure + prefix;
                let hi = lo + latest_delay;
                windows
                    .entry((k, id))
                    .and_modify(|w| {
                        w.0 = w.0.min(lo);
                        w.1 = w.1.max(hi);
                    })
                    .or_insert((lo, hi));
                prefix += net.edge(id).time;
            }
        }
        routes.push(fitting);
    }

    let flows: Vec<FlowVar> = windows
        .into_iter()
        .map(
            |((vehicle, edge), (earliest_entry, latest_entry))| FlowVar {
                vehicle,
                edge,
                earliest_entry,
                latest_entry,
            },
        )
        .collect();
    let flow_index = flows
        .iter()
        .enumerate()
        .map(|(i, f)| ((f.vehicle, f.edge), i))
        .collect();

    let mut by_edge: BTreeMap<EdgeId, Vec<usize>> = BTreeMap::new();
    for (i, f) in flows.iter().enumerate() {
        by_edge.entry(f.edge).or_default().push(i);
    }
    let mut follows = Vec::new();
    for (edge, vars) in &by_edge {
        for &a in vars {
            for &b in vars {
                let (fa, fb) = (&flows[a], &flows[b]);
                if fa.vehicle == fb.vehicle {
                    continue;
                }
                let capable = inst.vehicles()[fa.vehicle].platoon_capable
                    && inst.vehicles()[fb.vehicle].platoon_capable;
                let overlap =
                    fa.earliest_entry <= fb.latest_entry && fb.earliest_entry <= fa.latest_entry;
                if capable && overlap {
                    follows.push(FollowVar {
                        follower: fa.vehicle,
                        leader: fb.vehicle,
                        edge: *edge,
                    });
                }
            }
        }
    }
    let follow_index = follows
        .iter()
        .enumerate()
        .map(|(i, q)| ((q.follower, q.leader, q.edge), i))
        .collect();

    let horizon_start = inst
        .vehicles()
        .iter()
        .map(|v| v.earliest_departure)
        .min()
        .unwrap_or_else(Rat::zero);
    let horizon_end = inst
        .vehicles()
        .iter()
        .map(|v| v.deadline)
        .max()
        .unwrap_or_else(Rat::zero);
    let longest_edge = net
        .edges()
        .iter()
        .map(|e| e.time)
        .max()
        .unwrap_or_else(Rat::zero);
    let big_m = horizon_end - horizon_start + longest_edge + Rat::one();

    let mut model = CoordinationModel {
        instance: inst.clone(),
        flows,
        follows,
        flow_index,
        follow_index,
        routes,
        constraints: Vec::new(),
        big_m,
    };
    model.constraints = model.build_constraints();
    log::debug!("model size {:?}", model.size());
    Ok(model)
}

impl CoordinationModel {
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn flows(&self) -> &[FlowVar] {
        &self.flows
    }

    pub fn follows(&self) -> &[FollowVar] {
        &self.follows
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn routes(&self, vehicle: usize) -> &[Path] {
        &self.routes[vehicle]
    }

    pub fn flow_var(&self, vehicle: usize, edge: EdgeId) -> Option<usize> {
        self.flow_index.get(&(vehicle, edge)).copied()
    }

    pub fn follow_var(&self, follower: usize, leader: usize, edge: EdgeId) -> Option<usize> {
        self.follow_index.get(&(follower, leader, edge)).copied()
    }

    pub fn size(&self) -> ModelSize {
        ModelSize {
            flow: self.flows.len(),
            follow: self.follows.len(),
            delay: self.instance.len(),
            entry: self.flows.len(),
            constraints: self.constraints.len(),
        }
    }

    fn check_dims(&self, a: &Assignment) -> Result<()> {
        let ok = a.flow.len() == self.flows.len()
            && a.follow.len() == self.follows.len()
            && a.delay.len() == self.instance.len()
            && a.entry.len() == self.flows.len();
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "assignment has {}/{}/{}/{} values, model has {}/{}/{}/{}",
                a.flow.len(),
                a.follow.len(),
                a.delay.len(),
                a.entry.len(),
                self.flows.len(),
                self.follows.len(),
                self.instance.len(),
                self.flows.len()
            )))
        }
    }

    /// Objective value of an assignment.
    pub fn objective_value(&self, a: &Assignment) -> Result<Rat> {
        self.check_dims(a)?;
        let net = self.instance.network();
        let eta = self.instance.eta();
        let mut total = Rat::zero();
        for (f, &on) in self.flows.iter().zip(&a.flow) {
            if on {
                total += net.edge(f.edge).cost;
            }
        }
        for (q, &on) in self.follows.iter().zip(&a.follow) {
            if on {
                total -= eta * net.edge(q.edge).cost;
            }
        }
        for (k, &t) in a.delay.iter().enumerate() {
            total += self.instance.wait_cost(k) * t;
        }
        Ok(total)
    }

    pub fn empty_assignment(&self) -> Assignment {
        Assignment {
            flow: vec![false; self.flows.len()],
            follow: vec![false; self.follows.len()],
            delay: vec![Rat::zero(); self.instance.len()],
            entry: vec![Rat::zero(); self.flows.len()],
        }
    }

    /// Lists every violated constraint; an empty list means the assignment is feasible.
    pub fn check_feasibility(&self, a: &Assignment) -> Result<Vec<Violation>> {
        self.check_dims(a)?;
        let inst = &self.instance;
        let net = inst.network();
        let mut violations = Vec::new();
        let endpoints = |id: EdgeId| {
            let e = net.edge(id);
            (e.from, e.to)
        };

        for (k, v) in inst.vehicles().iter().enumerate() {
            let delay = a.delay[k];
            if delay < Rat::zero() || delay > inst.max_wait() {
                violations.push(Violation::DelayBound {
                    vehicle: v.id,
                    delay,
                    max_wait: inst.max_wait(),
                });
            }
            let active: Vec<usize> = (0..self.flows.len())
                .filter(|&i| a.flow[i] && self.flows[i].vehicle == k)
                .collect();
            let route = match trace_route(self, &active, v.origin, v.destination) {
                Ok(route) => route,
                Err(detail) => {
                    violations.push(Violation::FlowConservation {
                        vehicle: v.id,
                        detail,
                    });
                    continue;
                }
            };
            let departure = v.earliest_departure + delay;
            let first = a.entry[route[0]];
            if first != departure {
                violations.push(Violation::Departure {
                    vehicle: v.id,
                    expected: departure,
                    actual: first,
                });
            }
            for pair in route.windows(2) {
                let prev = &self.flows[pair[0]];
                let expected = a.entry[pair[0]] + net.edge(prev.edge).time;
                let actual = a.entry[pair[1]];
                if actual != expected {
                    violations.push(Violation::Progression {
                        vehicle: v.id,
                        edge: endpoints(self.flows[pair[1]].edge),
                        expected,
                        actual,
                    });
                }
            }
            let last = *route.last().expect("nonempty route");
            let arrival = a.entry[last] + net.edge(self.flows[last].edge).time;
            if arrival > v.deadline {
                violations.push(Violation::Deadline {
                    vehicle: v.id,
                    arrival,
                    deadline: v.deadline,
                });
            }
        }

        // platoon structure, edge by edge
        let mut per_edge: BTreeMap<EdgeId, Vec<usize>> = BTreeMap::new();
        for (i, q) in self.follows.iter().enumerate() {
            if !a.follow[i] {
                continue;
            }
            let id_of = |k: usize| inst.vehicles()[k].id;
            let fv = self
                .flow_var(q.follower, q.edge)
                .expect("follow implies flow var");
            let fw = self
                .flow_var(q.leader, q.edge)
                .expect("follow implies flow var");
            if !a.flow[fv] || !a.flow[fw] {
                violations.push(Violation::FollowWithoutFlow {
                    follower: id_of(q.follower),
                    leader: id_of(q.leader),
                    edge: endpoints(q.edge),
                });
            } else if a.entry[fv] != a.entry[fw] {
                violations.push(Violation::Synchronization {
                    follower: id_of(q.follower),
                    leader: id_of(q.leader),
                    edge: endpoints(q.edge),
                });
            }
            per_edge.entry(q.edge).or_default().push(i);
        }
        for (edge, active) in per_edge {
            violations.extend(self.platoon_structure(edge, &active));
        }
        Ok(violations)
    }

    /// Each follower follows exactly one vehicle, and each connected platoon has one leader.
    fn platoon_structure(&self, edge: EdgeId, active: &[usize]) -> Vec<Violation> {
        let inst = &self.instance;
        let e = inst.network().edge(edge);
        let mut out = Vec::new();
        let mut follows_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut members: Vec<usize> = Vec::new();
        for &i in active {
            let q = self.follows[i];
            follows_of.entry(q.follower).or_default().push(q.leader);
            members.push(q.follower);
            members.push(q.leader);
        }
        members.sort_unstable();
        members.dedup();
        for (&v, leaders) in &follows_of {
            if leaders.len() > 1 {
                out.push(Violation::MultipleLeaders {
                    vehicle: inst.vehicles()[v].id,
                    edge: (e.from, e.to),
                });
            }
        }
        // union-find over the undirected follow graph
        let pos: HashMap<usize, usize> = members.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let mut parent: Vec<usize> = (0..members.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &i in active {
            let q = self.follows[i];
            let (a, b) = (
                find(&mut parent, pos[&q.follower]),
                find(&mut parent, pos[&q.leader]),
            );
            parent[a] = b;
        }
        let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &m) in members.iter().enumerate() {
            let root = find(&mut parent, i);
            components.entry(root).or_default().push(m);
        }
        for group in components.values() {
            let leaders = group.iter().filter(|m| !follows_of.contains_key(m)).count();
            if leaders != 1 {
                out.push(Violation::LeaderCount {
                    edge: (e.from, e.to),
                    members: group.iter().map(|&m| inst.vehicles()[m].id).collect(),
                    leaders,
                });
            }
        }
        out
    }

    /// Translates a plan into model variables. Platoon groups become stars
    /// around their leader.
    pub fn assignment_from_plan(&self, plan: &Plan) -> Result<Assignment> {
        let inst = &self.instance;
        let net = inst.network();
        let mut a = self.empty_assignment();
        if plan.vehicles.len() != inst.len() {
            return Err(Error::DimensionMismatch(format!(
                "plan covers {} vehicles, instance has {}",
                plan.vehicles.len(),
                inst.len()
            )));
        }
        for vp in &plan.vehicles {
            let k = inst
                .position_of(vp.vehicle)
                .ok_or_else(|| Error::InvalidPlan(format!("unknown vehicle {}", vp.vehicle)))?;
            a.delay[k] = vp.delay;
            if vp.entry_times.len() + 1 != vp.route.len() {
                return Err(Error::InvalidPlan(format!(
                    "vehicle {} entry times do not match its route",
                    vp.vehicle
                )));
            }
            for ((from, to), &t) in vp.hops().zip(&vp.entry_times) {
                let edge = edge_of(net, from, to)?;
                let var = self.flow_var(k, edge).ok_or_else(|| {
                    Error::InvalidPlan(format!(
                        "vehicle {} uses {from}->{to}, which the model excludes",
                        vp.vehicle
                    ))
                })?;
                a.flow[var] = true;
                a.entry[var] = t;
            }
        }
        for g in &plan.platoons {
            let edge = edge_of(net, g.from, g.to)?;
            let leader = inst
                .position_of(g.leader)
                .ok_or_else(|| Error::InvalidPlan(format!("unknown vehicle {}", g.leader)))?;
            for follower_id in g.followers() {
                let follower = inst
                    .position_of(follower_id)
                    .ok_or_else(|| Error::InvalidPlan(format!("unknown vehicle {follower_id}")))?;
                let var = self.follow_var(follower, leader, edge).ok_or_else(|| {
                    Error::InvalidPlan(format!(
                        "no follow variable for {follower_id} behind {} on {}->{}",
                        g.leader, g.from, g.to
                    ))
                })?;
                a.follow[var] = true;
            }
        }
        Ok(a)
    }

    /// Convenience: feasibility violations of a plan, or why it could not be mapped.
    pub fn audit_plan(&self, plan: &Plan) -> Result<Vec<Violation>> {
        let a = self.assignment_from_plan(plan)?;
        self.check_feasibility(&a)
    }

    fn build_constraints(&self) -> Vec<LinearConstraint> {
        let inst = &self.instance;
        let net = inst.network();
        let m = self.big_m;
        let mut out = Vec::new();
        let con = |name: String, terms: Vec<(Var, Rat)>, sense: Sense, rhs: Rat| LinearConstraint {
            name,
            terms,
            sense,
            rhs,
        };

        let mut per_vehicle: Vec<Vec<usize>> = vec![Vec::new(); inst.len()];
        for (i, f) in self.flows.iter().enumerate() {
            per_vehicle[f.vehicle].push(i);
        }
        for (k, v) in inst.vehicles().iter().enumerate() {
            let mut nodes: BTreeMap<NodeId, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
            for &i in &per_vehicle[k] {
                let e = net.edge(self.flows[i].edge);
                nodes.entry(e.from).or_default().0.push(i);
                nodes.entry(e.to).or_default().1.push(i);
            }
            for (node, (outs, ins)) in &nodes {
                let balance = if *node == v.origin {
                    Rat::one()
                } else if *node == v.destination {
                    -Rat::one()
                } else {
                    Rat::zero()
                };
                let mut terms: Vec<(Var, Rat)> =
                    outs.iter().map(|&i| (Var::Flow(i), Rat::one())).collect();
                terms.extend(ins.iter().map(|&i| (Var::Flow(i), -Rat::one())));
                out.push(con(
                    format!("flow_v{}_n{}", v.id, node),
                    terms,
                    Sense::Eq,
                    balance,
                ));
                if !ins.is_empty() {
                    let terms = ins.iter().map(|&i| (Var::Flow(i), Rat::one())).collect();
                    out.push(con(
                        format!("enter_once_v{}_n{}", v.id, node),
                        terms,
                        Sense::Le,
                        Rat::one(),
                    ));
                }
                for &o in outs {
                    if *node == v.origin {
                        // s - t = T_O whenever the edge is used
                        let terms = vec![
                            (Var::Entry(o), Rat::one()),
                            (Var::Delay(k), -Rat::one()),
                            (Var::Flow(o), m),
                        ];
                        out.push(con(
                            format!("depart_hi_v{}_e{}", v.id, o),
                            terms,
                            Sense::Le,
                            v.earliest_departure + m,
                        ));
                        let terms = vec![
                            (Var::Entry(o), Rat::one()),
                            (Var::Delay(k), -Rat::one()),
                            (Var::Flow(o), -m),
                        ];
                        out.push(con(
                            format!("depart_lo_v{}_e{}", v.id, o),
                            terms,
                            Sense::Ge,
                            v.earliest_departure - m,
                        ));
                        continue;
                    }
                    for &i in ins {
                        // no waiting at intermediate nodes: s_out = s_in + time_in
                        let time = net.edge(self.flows[i].edge).time;
                        let two_m = m * int(2);
                        let terms = vec![
                            (Var::Entry(o), Rat::one()),
                            (Var::Entry(i), -Rat::one()),
                            (Var::Flow(i), m),
                            (Var::Flow(o), m),
                        ];
                        out.push(con(
                            format!("progress_hi_v{}_e{}_e{}", v.id, i, o),
                            terms,
                            Sense::Le,
                            time + two_m,
                        ));
                        let terms = vec![
                            (Var::Entry(o), Rat::one()),
                            (Var::Entry(i), -Rat::one()),
                            (Var::Flow(i), -m),
                            (Var::Flow(o), -m),
                        ];
                        out.push(con(
                            format!("progress_lo_v{}_e{}_e{}", v.id, i, o),
                            terms,
                            Sense::Ge,
                            time - two_m,
                        ));
                    }
                }
                if *node == v.destination {
                    for &i in ins {
                        let time = net.edge(self.flows[i].edge).time;
                        let terms = vec![(Var::Entry(i), Rat::one()), (Var::Flow(i), m)];
                        out.push(con(
                            format!("deadline_v{}_e{}", v.id, i),
                            terms,
                            Sense::Le,
                            v.deadline - time + m,
                        ));
                    }
                }
            }
        }

        let mut follower_terms: BTreeMap<(usize, EdgeId), Vec<usize>> = BTreeMap::new();
        for (j, q) in self.follows.iter().enumerate() {
            let fv = self.flow_index[&(q.follower, q.edge)];
            let fw = self.flow_index[&(q.leader, q.edge)];
            out.push(con(
                format!("q_uses_f_v{}_q{}", inst.vehicles()[q.follower].id, j),
                vec![(Var::Follow(j), Rat::one()), (Var::Flow(fv), -Rat::one())],
                Sense::Le,
                Rat::zero(),
            ));
            out.push(con(
                format!("q_uses_f_w{}_q{}", inst.vehicles()[q.leader].id, j),
                vec![(Var::Follow(j), Rat::one()), (Var::Flow(fw), -Rat::one())],
                Sense::Le,
                Rat::zero(),
            ));
            out.push(con(
                format!("sync_hi_q{j}"),
                vec![
                    (Var::Entry(fv), Rat::one()),
                    (Var::Entry(fw), -Rat::one()),
                    (Var::Follow(j), m),
                ],
                Sense::Le,
                m,
            ));
            out.push(con(
                format!("sync_lo_q{j}"),
                vec![
                    (Var::Entry(fv), Rat::one()),
                    (Var::Entry(fw), -Rat::one()),
                    (Var::Follow(j), -m),
                ],
                Sense::Ge,
                -m,
            ));
            follower_terms
                .entry((q.follower, q.edge))
                .or_default()
                .push(j);
        }
        for ((v, edge), qs) in &follower_terms {
            let f = self.flow_index[&(*v, *edge)];
            let mut terms: Vec<(Var, Rat)> =
                qs.iter().map(|&j| (Var::Follow(j), Rat::one())).collect();
            terms.push((Var::Flow(f), -Rat::one()));
            out.push(con(
                format!("follow_once_v{}_e{}", inst.vehicles()[*v].id, edge.0),
                terms,
                Sense::Le,
                Rat::zero(),
            ));
        }
        // a leader does not itself follow anyone on that edge
        for (j, q) in self.follows.iter().enumerate() {
            let mut terms = vec![(Var::Follow(j), Rat::one())];
            if let Some(qs) = follower_terms.get(&(q.leader, q.edge)) {
                terms.extend(qs.iter().map(|&i| (Var::Follow(i), Rat::one())));
            }
            out.push(con(
                format!("leader_free_q{j}"),
                terms,
                Sense::Le,
                Rat::one(),
            ));
        }
        out
    }

    fn var_name(&self, var: Var) -> String {
        let inst = &self.instance;
        let net = inst.network();
        match var {
            Var::Flow(i) | Var::Entry(i) => {
                let f = &self.flows[i];
                let e = net.edge(f.edge);
                let prefix = if matches!(var, Var::Flow(_)) {
                    "f"
                } else {
                    "s"
                };
                format!(
                    "{prefix}_v{}_{}_{}",
                    inst.vehicles()[f.vehicle].id,
                    e.from,
                    e.to
                )
            }
            Var::Follow(j) => {
                let q = self.follows[j];
                let e = net.edge(q.edge);
                format!(
                    "q_v{}_w{}_{}_{}",
                    inst.vehicles()[q.follower].id,
                    inst.vehicles()[q.leader].id,
                    e.from,
                    e.to
                )
            }
            Var::Delay(k) => format!("t_v{}", inst.vehicles()[k].id),
        }
    }

    /// CPLEX LP-format text of the model, for cross-checking with external solvers.
    pub fn to_lp(&self) -> String {
        let inst = &self.instance;
        let net = inst.network();
        let mut s = String::new();
        let term = |s: &mut String, coef: Rat, name: String| {
            let c = to_f64(coef);
            let _ = write!(
                s,
                " {} {} {}",
                if c < 0.0 { "-" } else { "+" },
                c.abs(),
                name
            );
        };
        s.push_str("\\ coordinated platooning model\nMinimize\n obj:");
        for (i, f) in self.flows.iter().enumerate() {
            term(&mut s, net.edge(f.edge).cost, self.var_name(Var::Flow(i)));
        }
        for (j, q) in self.follows.iter().enumerate() {
            term(
                &mut s,
                -inst.eta() * net.edge(q.edge).cost,
                self.var_name(Var::Follow(j)),
            );
        }
        for k in 0..inst.len() {
            term(&mut s, inst.wait_cost(k), self.var_name(Var::Delay(k)));
        }
        s.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(s, " {}:", c.name);
            for &(var, coef) in &c.terms {
                term(&mut s, coef, self.var_name(var));
            }
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(s, " {op} {}", to_f64(c.rhs));
        }
        s.push_str("Bounds\n");
        for k in 0..inst.len() {
            let _ = writeln!(
                s,
                " 0 <= {} <= {}",
                self.var_name(Var::Delay(k)),
                to_f64(inst.max_wait())
            );
        }
        for (i, f) in self.flows.iter().enumerate() {
            let _ = writeln!(
                s,
                " {} <= {} <= {}",
                to_f64(f.earliest_entry),
                self.var_name(Var::Entry(i)),
                to_f64(f.latest_entry)
            );
        }
        s.push_str("Binaries\n");
        for i in 0..self.flows.len() {
            let _ = writeln!(s, " {}", self.var_name(Var::Flow(i)));
        }
        for j in 0..self.follows.len() {
            let _ = writeln!(s, " {}", self.var_name(Var::Follow(j)));
        }
        s.push_str("End\n");
        s
    }
}

/// Orders a vehicle's active flow variables into one origin-to-destination path.
fn trace_route(
    model: &CoordinationModel,
    active: &[usize],
    origin: NodeId,
    dest: NodeId,
) -> Result<Vec<usize>, String> {
    let net = model.instance.network();
    let mut next: HashMap<NodeId, usize> = HashMap::new();
    for &i in active {
        let e = net.edge(model.flows[i].edge);
        if next.insert(e.from, i).is_some() {
            return Err(format!("node {} is left twice", e.from));
        }
    }
    let mut route = Vec::with_capacity(active.len());
    let mut seen = std::collections::HashSet::new();
    let mut at = origin;
    seen.insert(at);
    while at != dest {
        let Some(&i) = next.get(&at) else {
            return Err(format!("route stops at node {at}"));
        };
        route.push(i);
        at = net.edge(model.flows[i].edge).to;
        if !seen.insert(at) {
            return Err(format!("route revisits node {at}"));
        }
    }
    if route.len() != active.len() {
        return Err(format!(
            "{} active edges are off the route",
            active.len() - route.len()
        ));
    }
    Ok(route)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Vehicle;
    use crate::network::{make_grid, RoadNetwork};
    use crate::plan::SolveStatus;
    use crate::rational::rat;
    use std::sync::Arc;

    fn line(n: u32) -> Arc<RoadNetwork> {
        Arc::new(make_grid(1, n, int(1), int(1)).unwrap())
    }

    fn instance(net: Arc<RoadNetwork>, trips: &[(u32, u32, i64)], p: i64) -> Instance {
        let vehicles = trips
            .iter()
            .enumerate()
            .map(|(k, &(o, d, t))| {
                let travel = net.shortest_path(NodeId(o), NodeId(d)).unwrap().total_time;
                Vehicle::new(
                    k as u32,
                    NodeId(o),
                    NodeId(d),
                    int(t),
                    int(t) + travel + int(p),
                )
            })
            .collect();
        Instance::new(net, vehicles, int(p), rat(1, 10), Rat::zero()).unwrap()
    }

    #[test]
    fn disjoint_windows_have_no_follow_variables() {
        let inst = instance(line(4), &[(0, 3, 0), (0, 3, 50)], 5);
        let model = generate_variables(&inst).unwrap();
        assert_eq!(model.follows().len(), 0);
        assert_eq!(model.flows().len(), 6);
    }

    #[test]
    fn straight_trip_flows_stay_inside_detour_bound() {
        let net = Arc::new(make_grid(10, 10, int(1), int(1)).unwrap());
        let inst = instance(net, &[(0, 3, 0)], 0);
        let model = generate_variables(&inst).unwrap();
        let edges: Vec<(u32, u32)> = model
            .flows()
            .iter()
            .map(|f| {
                let e = inst.network().edge(f.edge);
                (e.from.0, e.to.0)
            })
            .collect();
        assert_eq!(edges.len(), 3);
        assert!(edges.contains(&(0, 1)) && edges.contains(&(1, 2)) && edges.contains(&(2, 3)));
    }

    #[test]
    fn identical_single_edge_trips_have_two_follow_variables() {
        let inst = instance(line(2), &[(0, 1, 0), (0, 1, 0)], 0);
        let model = generate_variables(&inst).unwrap();
        assert_eq!(model.follows().len(), 2);
        let pairs: Vec<(usize, usize)> = model
            .follows()
            .iter()
            .map(|q| (q.follower, q.leader))
            .collect();
        assert!(pairs.contains(&(0, 1)) && pairs.contains(&(1, 0)));
    }

    #[test]
    fn incapable_vehicles_get_no_follow_variables() {
        let inst = instance(line(2), &[(0, 1, 0), (0, 1, 0)], 0);
        let mut vehicles = inst.vehicles().to_vec();
        vehicles[0].platoon_capable = false;
        let inst = Instance::new(
            inst.shared_network(),
            vehicles,
            int(0),
            rat(1, 10),
            Rat::zero(),
        )
        .unwrap();
        assert!(generate_variables(&inst).unwrap().follows().is_empty());
    }

    fn platoon_assignment(n: usize) -> (CoordinationModel, Assignment) {
        let trips: Vec<(u32, u32, i64)> = vec![(0, 1, 0); n];
        let inst = instance(line(2), &trips, 0);
        let model = generate_variables(&inst).unwrap();
        let mut a = model.empty_assignment();
        a.flow.iter_mut().for_each(|f| *f = true);
        for (j, q) in model.follows().iter().enumerate() {
            a.follow[j] = q.leader == 0;
        }
        (model, a)
    }

    #[test]
    fn objective_counts_followers_at_discount() {
        let (model, a) = platoon_assignment(2);
        assert_eq!(model.objective_value(&a).unwrap(), rat(19, 10));
        assert!(model.check_feasibility(&a).unwrap().is_empty());
        let (model, a) = platoon_assignment(3);
        assert_eq!(model.objective_value(&a).unwrap(), rat(28, 10));
        assert!(model.check_feasibility(&a).unwrap().is_empty());
    }

    #[test]
    fn solo_trip_objective_is_path_cost() {
        let net = Arc::new(make_grid(10, 10, int(1), int(1)).unwrap());
        let inst = instance(net, &[(0, 34, 0)], 0);
        let model = generate_variables(&inst).unwrap();
        let path = inst.shortest_path(0).clone();
        assert_eq!(path.total_cost, int(7));
        let plan = Plan::from_schedule(&inst, &[(&path, int(0))], SolveStatus::Optimal).unwrap();
        let a = model.assignment_from_plan(&plan).unwrap();
        assert_eq!(model.objective_value(&a).unwrap(), int(7));
        assert!(model.check_feasibility(&a).unwrap().is_empty());
    }

    #[test]
    fn mismatched_assignment_is_rejected() {
        let (model, mut a) = platoon_assignment(2);
        a.follow.pop();
        assert!(matches!(
            model.objective_value(&a),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(model.check_feasibility(&a).is_err());
    }

    #[test]
    fn unequal_entry_times_break_synchronization() {
        let inst = instance(line(3), &[(0, 2, 0), (0, 2, 0)], 3);
        let model = generate_variables(&inst).unwrap();
        let p0 = inst.shortest_path(0).clone();
        let plan = Plan::from_schedule(
            &inst,
            &[(&p0, int(0)), (&p0, int(1))],
            SolveStatus::Heuristic,
        )
        .unwrap();
        let mut a = model.assignment_from_plan(&plan).unwrap();
        let e = inst.network().edge_between(NodeId(0), NodeId(1)).unwrap();
        let q = model.follow_var(1, 0, e).unwrap();
        a.follow[q] = true;
        let v = model.check_feasibility(&a).unwrap();
        assert_eq!(v.len(), 1);
        assert!(matches!(
            &v[0],
            Violation::Synchronization { follower, leader, edge }
                if *follower == VehicleId(1) && *leader == VehicleId(0) && *edge == (NodeId(0), NodeId(1))
        ));
    }

    #[test]
    fn delay_beyond_bound_is_flagged() {
        let inst = instance(line(3), &[(0, 2, 0)], 3);
        let model = generate_variables(&inst).unwrap();
        let p0 = inst.shortest_path(0).clone();
        let plan = Plan::from_schedule(&inst, &[(&p0, int(4))], SolveStatus::Heuristic).unwrap();
        let a = model.assignment_from_plan(&plan).unwrap();
        let v = model.check_feasibility(&a).unwrap();
        assert!(v.iter().any(|x| matches!(x, Violation::DelayBound { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::Deadline { .. })));
    }

    #[test]
    fn broken_routes_and_progression() {
        let inst = instance(line(4), &[(0, 3, 0)], 2);
        let model = generate_variables(&inst).unwrap();
        let path = inst.shortest_path(0).clone();
        let plan = Plan::from_schedule(&inst, &[(&path, int(0))], SolveStatus::Heuristic).unwrap();
        let good = model.assignment_from_plan(&plan).unwrap();

        let mut gap = good.clone();
        let mid = model.flow_var(0, path.edges[1]).unwrap();
        gap.flow[mid] = false;
        assert!(matches!(
            model.check_feasibility(&gap).unwrap()[0],
            Violation::FlowConservation { .. }
        ));

        let mut waits = good.clone();
        let last = model.flow_var(0, path.edges[2]).unwrap();
        waits.entry[last] += int(1);
        assert!(matches!(
            model.check_feasibility(&waits).unwrap()[0],
            Violation::Progression { .. }
        ));

        let mut late_start = good;
        let first = model.flow_var(0, path.edges[0]).unwrap();
        late_start.entry[first] += int(1);
        assert!(model
            .check_feasibility(&late_start)
            .unwrap()
            .iter()
            .any(|x| matches!(x, Violation::Departure { .. })));
    }

    #[test]
    fn leader_rules() {
        let (model, mut a) = platoon_assignment(3);
        // everyone follows someone: no leader
        for (j, q) in model.follows().iter().enumerate() {
            a.follow[j] = (q.follower + 1) % 3 == q.leader;
        }
        let v = model.check_feasibility(&a).unwrap();
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::LeaderCount { leaders: 0, .. })));

        // vehicle 2 follows both others
        let (model, mut a) = platoon_assignment(3);
        for (j, q) in model.follows().iter().enumerate() {
            a.follow[j] = q.follower == 2;
        }
        let v = model.check_feasibility(&a).unwrap();
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::MultipleLeaders { .. })));

        // chain 2 -> 1 -> 0 is a valid platoon
        let (model, mut a) = platoon_assignment(3);
        for (j, q) in model.follows().iter().enumerate() {
            a.follow[j] = q.follower == q.leader + 1;
        }
        assert!(model.check_feasibility(&a).unwrap().is_empty());
    }

    #[test]
    fn objective_with_no_follows_is_path_cost_sum() {
        let net = Arc::new(make_grid(4, 4, int(1), int(1)).unwrap());
        let inst = instance(net, &[(0, 15, 0), (3, 12, 1), (5, 6, 2)], 2);
        let model = generate_variables(&inst).unwrap();
        let paths: Vec<Path> = (0..3).map(|k| inst.shortest_path(k).clone()).collect();
        let choices: Vec<(&Path, Rat)> = paths.iter().map(|p| (p, Rat::zero())).collect();
        let mut plan = Plan::from_schedule(&inst, &choices, SolveStatus::Heuristic).unwrap();
        plan.platoons.clear();
        let a = model.assignment_from_plan(&plan).unwrap();
        let sum: Rat = paths.iter().map(|p| p.total_cost).sum();
        assert_eq!(model.objective_value(&a).unwrap(), sum);
    }

    #[test]
    fn lp_dump_lists_every_variable_kind() {
        let (model, _) = platoon_assignment(2);
        let lp = model.to_lp();
        assert!(lp.starts_with("\\ coordinated platooning model"));
        assert!(
            lp.contains("Minimize")
                && lp.contains("Subject To")
                && lp.contains("Binaries")
                && lp.ends_with("End\n")
        );
        assert!(lp.contains("q_v0_w1_0_1") && lp.contains("f_v1_0_1") && lp.contains("t_v0"));
        assert_eq!(lp.matches("sync_hi").count(), model.follows().len());
    }
}
