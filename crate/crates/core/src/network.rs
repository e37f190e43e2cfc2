//! Directed road networks, the lattice generator used in the case study, and
//! the path searches the planner is built on.
//!
//! Every search breaks ties on the node-id sequence, so two calls with the
//! same inputs always return the same edges in the same order.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rational::{int, serde_rat, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Dense index into [`RoadNetwork::edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Flow-density relation of one link.
///
/// Speeds are in km/h, density in veh/km and capacity in veh/h.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FundamentalDiagram {
    #[serde(rename = "u", with = "serde_rat")]
    pub free_flow_speed: Rat,
    #[serde(rename = "w", with = "serde_rat")]
    pub wave_speed: Rat,
    #[serde(rename = "rho_jam", with = "serde_rat")]
    pub jam_density: Rat,
    #[serde(rename = "capacity", with = "serde_rat")]
    pub base_capacity: Rat,
}

impl Default for FundamentalDiagram {
    fn default() -> Self {
        FundamentalDiagram {
            free_flow_speed: int(60),
            wave_speed: int(20),
            jam_density: int(150),
            base_capacity: int(2200),
        }
    }
}

impl FundamentalDiagram {
    pub fn validate(&self) -> Result<()> {
        if self.free_flow_speed <= Rat::zero()
            || self.wave_speed <= Rat::zero()
            || self.jam_density <= Rat::zero()
        {
            return Err(invalid(
                "fundamental diagram needs u > 0, w > 0 and rho_jam > 0",
            ));
        }
        if self.base_capacity < Rat::zero() {
            return Err(invalid("capacity must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    /// Fuel units spent by a lone vehicle traversing the edge.
    pub cost: Rat,
    /// Free-flow traversal time in minutes.
    pub time: Rat,
    pub diagram: FundamentalDiagram,
}

impl Edge {
    /// Link length in km implied by the free-flow speed and traversal time.
    pub fn length_km(&self) -> Rat {
        self.diagram.free_flow_speed * self.time / int(60)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    pub total_cost: Rat,
    pub total_time: Rat,
}

impl Path {
    pub fn origin(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.nodes.last().expect("path has at least one node")
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Immutable directed graph. Node ids are arbitrary; edges are indexed densely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoadNetwork {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    edges: Vec<Edge>,
    /// Outgoing edges per node index, sorted by head node id.
    outgoing: Vec<Vec<EdgeId>>,
    incoming: Vec<Vec<EdgeId>>,
    by_endpoints: HashMap<(NodeId, NodeId), EdgeId>,
}

impl RoadNetwork {
    pub fn new(mut nodes: Vec<NodeId>, edges: Vec<Edge>) -> Result<Self> {
        nodes.sort();
        if nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("duplicate node id"));
        }
        let index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut by_endpoints = HashMap::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            let from = *index.get(&e.from).ok_or(Error::UnknownNode(e.from))?;
            let to = *index.get(&e.to).ok_or(Error::UnknownNode(e.to))?;
            if from == to {
                return Err(invalid(format!("self-loop at node {}", e.from)));
            }
            if e.cost < Rat::zero() {
                return Err(invalid(format!(
                    "edge {}->{} has negative cost",
                    e.from, e.to
                )));
            }
            if e.time <= Rat::zero() {
                return Err(invalid(format!(
                    "edge {}->{} needs a positive traversal time",
                    e.from, e.to
                )));
            }
            e.diagram.validate()?;
            let id = EdgeId(k as u32);
            if by_endpoints.insert((e.from, e.to), id).is_some() {
                return Err(invalid(format!("parallel edge {}->{}", e.from, e.to)));
            }
            outgoing[from].push(id);
            incoming[to].push(id);
        }
        for list in outgoing.iter_mut() {
            list.sort_by_key(|id| edges[id.index()].to);
        }
        for list in incoming.iter_mut() {
            list.sort_by_key(|id| edges[id.index()].from);
        }
        Ok(RoadNetwork {
            nodes,
            index,
            edges,
            outgoing,
            incoming,
            by_endpoints,
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.index()]
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.index.contains_key(&node)
    }

    pub fn edge_between(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.by_endpoints.get(&(from, to)).copied()
    }

    pub fn outgoing(&self, node: NodeId) -> &[EdgeId] {
        self.index
            .get(&node)
            .map(|&i| self.outgoing[i].as_slice())
            .unwrap_or(&[])
    }

    pub fn incoming(&self, node: NodeId) -> &[EdgeId] {
        self.index
            .get(&node)
            .map(|&i| self.incoming[i].as_slice())
            .unwrap_or(&[])
    }

    fn position(&self, node: NodeId) -> Result<usize> {
        self.index
            .get(&node)
            .copied()
            .ok_or(Error::UnknownNode(node))
    }

    /// Builds a [`Path`] from a node sequence, checking every hop exists.
    pub fn path_from_nodes(&self, nodes: &[NodeId]) -> Result<Path> {
        if nodes.is_empty() {
            return Err(invalid("empty node sequence"));
        }
        for &n in nodes {
            self.position(n)?;
        }
        let mut edges = Vec::with_capacity(nodes.len().saturating_sub(1));
        let mut total_cost = Rat::zero();
        let mut total_time = Rat::zero();
        for hop in nodes.windows(2) {
            let id = self
                .edge_between(hop[0], hop[1])
                .ok_or_else(|| invalid(format!("no edge {}->{}", hop[0], hop[1])))?;
            let e = self.edge(id);
            total_cost += e.cost;
            total_time += e.time;
            edges.push(id);
        }
        Ok(Path {
            nodes: nodes.to_vec(),
            edges,
            total_cost,
            total_time,
        })
    }

    /// Minimum-cost path; among equal-cost paths the lexicographically
    /// smallest node sequence wins.
    pub fn shortest_path(&self, origin: NodeId, dest: NodeId) -> Result<Path> {
        let start = self.position(origin)?;
        let goal = self.position(dest)?;
        // Labels are (cost, node sequence). Extending a label makes it strictly
        // larger, so Dijkstra's settle-once argument still holds.
        let mut best: Vec<Option<(Rat, Vec<NodeId>)>> = vec![None; self.nodes.len()];
        let mut settled = vec![false; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        best[start] = Some((Rat::zero(), vec![origin]));
        heap.push(Reverse((Rat::zero(), vec![origin], start)));
        while let Some(Reverse((cost, seq, at))) = heap.pop() {
            if settled[at] {
                continue;
            }
            settled[at] = true;
            if at == goal {
                return self.path_from_nodes(&seq);
            }
            for &id in &self.outgoing[at] {
                let e = &self.edges[id.index()];
                let next = self.index[&e.to];
                if settled[next] {
                    continue;
                }
                let next_cost = cost + e.cost;
                let mut next_seq = seq.clone();
                next_seq.push(e.to);
                let improves = match &best[next] {
                    None => true,
                    Some((c, s)) => (next_cost, &next_seq) < (*c, s),
                };
                if improves {
                    best[next] = Some((next_cost, next_seq.clone()));
                    heap.push(Reverse((next_cost, next_seq, next)));
                }
            }
        }
        Err(Error::NoPath {
            from: origin,
            to: dest,
        })
    }

    /// Cost of the cheapest path from every node to `dest` (None if unreachable).
    pub fn costs_to(&self, dest: NodeId) -> Result<Vec<Option<Rat>>> {
        let goal = self.position(dest)?;
        let mut dist: Vec<Option<Rat>> = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[goal] = Some(Rat::zero());
        heap.push(Reverse((Rat::zero(), goal)));
        while let Some(Reverse((d, at))) = heap.pop() {
            if dist[at].is_some_and(|best| d > best) {
                continue;
            }
            for &id in &self.incoming[at] {
                let e = &self.edges[id.index()];
                let prev = self.index[&e.from];
                let nd = d + e.cost;
                if dist[prev].is_none_or(|old| nd < old) {
                    dist[prev] = Some(nd);
                    heap.push(Reverse((nd, prev)));
                }
            }
        }
        Ok(dist)
    }

    /// Every simple path whose cost is at most `bound_factor` times the
    /// shortest-path cost, sorted by (cost, node sequence).
    pub fn bounded_paths(
        &self,
        origin: NodeId,
        dest: NodeId,
        bound_factor: Rat,
    ) -> Result<Vec<Path>> {
        if bound_factor < Rat::one() {
            return Err(invalid("bound factor must be at least 1"));
        }
        let shortest = self.shortest_path(origin, dest)?;
        let budget = shortest.total_cost * bound_factor;
        let to_dest = self.costs_to(dest)?;
        let goal = self.position(dest)?;

        let mut found = Vec::new();
        let mut visited = vec![false; self.nodes.len()];
        let mut stack_nodes = vec![origin];
        let mut stack_edges = Vec::new();
        let start = self.position(origin)?;
        visited[start] = true;
        self.extend_bounded(
            start,
            goal,
            Rat::zero(),
            budget,
            &to_dest,
            &mut visited,
            &mut stack_nodes,
            &mut stack_edges,
            &mut found,
        );
        found.sort_by(|a: &Path, b: &Path| (a.total_cost, &a.nodes).cmp(&(b.total_cost, &b.nodes)));
        Ok(found)
    }

    #[allow(clippy::too_many_arguments)]
    fn extend_bounded(
        &self,
        at: usize,
        goal: usize,
        cost: Rat,
        budget: Rat,
        to_dest: &[Option<Rat>],
        visited: &mut [bool],
        nodes: &mut Vec<NodeId>,
        edges: &mut Vec<EdgeId>,
        found: &mut Vec<Path>,
    ) {
        if at == goal {
            let total_time = edges.iter().map(|id| self.edge(*id).time).sum();
            found.push(Path {
                nodes: nodes.clone(),
                edges: edges.clone(),
                total_cost: cost,
                total_time,
            });
            return;
        }
        for &id in &self.outgoing[at] {
            let e = &self.edges[id.index()];
            let next = self.index[&e.to];
            if visited[next] {
                continue;
            }
            let Some(rest) = to_dest[next] else { continue };
            let reached = cost + e.cost;
            if reached + rest > budget {
                continue;
            }
            visited[next] = true;
            nodes.push(e.to);
            edges.push(id);
            self.extend_bounded(
                next, goal, reached, budget, to_dest, visited, nodes, edges, found,
            );
            edges.pop();
            nodes.pop();
            visited[next] = false;
        }
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    from: e.from,
                    to: e.to,
                    cost: e.cost,
                    time: e.time,
                    diagram: e.diagram,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: NetworkDocument) -> Result<Self> {
        let edges = doc
            .edges
            .into_iter()
            .map(|r| Edge {
                from: r.from,
                to: r.to,
                cost: r.cost,
                time: r.time,
                diagram: r.diagram,
            })
            .collect();
        RoadNetwork::new(doc.nodes, edges)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDocument =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        RoadNetwork::from_document(doc)
    }
}

/// On-disk network layout: `{nodes: [...], edges: [{from, to, cost, time, u, w, rho_jam, capacity}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: NodeId,
    pub to: NodeId,
    #[serde(with = "serde_rat")]
    pub cost: Rat,
    #[serde(with = "serde_rat")]
    pub time: Rat,
    #[serde(flatten)]
    pub diagram: FundamentalDiagram,
}

/// Node id of lattice cell (`row`, `col`) in a grid with `cols` columns.
pub fn grid_node(row: u32, col: u32, cols: u32) -> NodeId {
    NodeId(row * cols + col)
}

/// Rectangular lattice with two opposing directed edges between neighbours.
pub fn make_grid(rows: u32, cols: u32, edge_cost: Rat, edge_time: Rat) -> Result<RoadNetwork> {
    make_grid_with(
        rows,
        cols,
        edge_cost,
        edge_time,
        FundamentalDiagram::default(),
    )
}

pub fn make_grid_with(
    rows: u32,
    cols: u32,
    edge_cost: Rat,
    edge_time: Rat,
    diagram: FundamentalDiagram,
) -> Result<RoadNetwork> {
    if rows == 0 || cols == 0 {
        return Err(invalid("grid dimensions must be positive"));
    }
    let nodes = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| grid_node(r, c, cols)))
        .collect();
    let mut edges = Vec::new();
    let mut link = |a: NodeId, b: NodeId| {
        for (from, to) in [(a, b), (b, a)] {
            edges.push(Edge {
                from,
                to,
                cost: edge_cost,
                time: edge_time,
                diagram,
            });
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                link(grid_node(r, c, cols), grid_node(r, c + 1, cols));
            }
            if r + 1 < rows {
                link(grid_node(r, c, cols), grid_node(r + 1, c, cols));
            }
        }
    }
    RoadNetwork::new(nodes, edges)
}

/// Number of monotone lattice paths from (0,0) to (m,n): `binomial(m+n, n)`.
pub fn count_shortest_grid_paths(m: u32, n: u32) -> u128 {
    let k = m.min(n) as u128;
    let total = (m + n) as u128;
    // Running product stays integral: C(total-k+i, i) at every step.
    (1..=k).fold(1u128, |acc, i| acc * (total - k + i) / i)
}
