use proptest::prelude::*;

use platoon::network::{
    count_shortest_grid_paths, grid_node, make_grid, Edge, NodeId, RoadNetwork,
};
use platoon::rational::{int, rat, Rat};

/// Every simple path from `from` to `to`, as node sequences, by plain DFS.
fn all_simple_paths(net: &RoadNetwork, from: NodeId, to: NodeId) -> Vec<(Rat, Vec<NodeId>)> {
    fn go(
        net: &RoadNetwork,
        at: NodeId,
        to: NodeId,
        seen: &mut Vec<NodeId>,
        cost: Rat,
        out: &mut Vec<(Rat, Vec<NodeId>)>,
    ) {
        if at == to {
            out.push((cost, seen.clone()));
            return;
        }
        for e in net.edges().iter().filter(|e| e.from == at) {
            if seen.contains(&e.to) {
                continue;
            }
            seen.push(e.to);
            go(net, e.to, to, seen, cost + e.cost, out);
            seen.pop();
        }
    }
    let mut out = Vec::new();
    go(net, from, to, &mut vec![from], int(0), &mut out);
    out
}

fn monotone_paths(m: u32, n: u32) -> u128 {
    if m == 0 || n == 0 {
        1
    } else {
        monotone_paths(m - 1, n) + monotone_paths(m, n - 1)
    }
}

#[test]
fn grid_path_counts_match_enumeration() {
    for m in 0..=6 {
        for n in 0..=6 {
            assert_eq!(
                count_shortest_grid_paths(m, n),
                monotone_paths(m, n),
                "{m}x{n}"
            );
        }
    }
    // cross-check a few against the network itself
    for (m, n) in [(1, 1), (2, 3), (3, 3)] {
        let net = make_grid(m + 1, n + 1, int(1), int(1)).unwrap();
        let target = grid_node(m, n, n + 1);
        let shortest = int((m + n) as i64);
        let count = all_simple_paths(&net, NodeId(0), target)
            .into_iter()
            .filter(|(c, _)| *c == shortest)
            .count();
        assert_eq!(count as u128, count_shortest_grid_paths(m, n));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounded_paths_prune_nothing_they_should_keep(
        costs in prop::collection::vec(1i64..5, 1..8),
        from in 0u32..9,
        to in 0u32..9,
        factor_num in 10i64..16,
    ) {
        prop_assume!(from != to);
        let base = make_grid(3, 3, int(1), int(1)).unwrap();
        let edges: Vec<Edge> = base
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| Edge { cost: int(costs[i % costs.len()]), ..e.clone() })
            .collect();
        let net = RoadNetwork::new(base.nodes().to_vec(), edges).unwrap();
        let factor = rat(factor_num, 10);
        let shortest = net.shortest_path(NodeId(from), NodeId(to)).unwrap().total_cost;
        let mut expected: Vec<(Rat, Vec<NodeId>)> = all_simple_paths(&net, NodeId(from), NodeId(to))
            .into_iter()
            .filter(|(c, _)| *c <= shortest * factor)
            .collect();
        expected.sort();
        let got: Vec<(Rat, Vec<NodeId>)> = net
            .bounded_paths(NodeId(from), NodeId(to), factor)
            .unwrap()
            .into_iter()
            .map(|p| (p.total_cost, p.nodes))
            .collect();
        prop_assert_eq!(got, expected);
    }
}
