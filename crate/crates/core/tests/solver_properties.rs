use std::sync::Arc;

use proptest::prelude::*;

use platoon::adhoc::simulate_opportunistic;
use platoon::instance::{generate_case_study, DepartureDistribution, Instance, Vehicle};
use platoon::model::generate_variables;
use platoon::network::{make_grid, Edge, NodeId, RoadNetwork};
use platoon::plan::Plan;
use platoon::rational::{int, rat, Rat};
use platoon::solver::{solve_exact, solve_heuristic, solve_oracle, SolverConfig};

fn grid_with_weights(rows: u32, cols: u32, weights: &[(i64, i64)]) -> Arc<RoadNetwork> {
    let base = make_grid(rows, cols, int(1), int(1)).unwrap();
    let edges: Vec<Edge> = base
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (c, t) = weights[i % weights.len()];
            Edge {
                cost: int(c),
                time: int(t),
                ..e.clone()
            }
        })
        .collect();
    Arc::new(RoadNetwork::new(base.nodes().to_vec(), edges).unwrap())
}

fn small_instance(
    net: Arc<RoadNetwork>,
    trips: &[(u32, u32, i64, i64, bool)],
    p: i64,
    eta: Rat,
    wait_cost: Rat,
) -> Option<Instance> {
    let n = net.nodes().len() as u32;
    let mut vehicles = Vec::new();
    for (i, &(o, d, t_o, slack, capable)) in trips.iter().enumerate() {
        let (o, d) = (o % n, d % n);
        if o == d {
            return None;
        }
        let shortest = net.shortest_path(NodeId(o), NodeId(d)).ok()?;
        let mut v = Vehicle::new(
            i as u32,
            NodeId(o),
            NodeId(d),
            int(t_o),
            int(t_o) + shortest.total_time + int(slack),
        );
        v.platoon_capable = capable;
        vehicles.push(v);
    }
    Instance::new(net, vehicles, int(p), eta, wait_cost).ok()
}

fn audit(inst: &Instance, plan: &Plan) {
    let model = generate_variables(inst).unwrap();
    assert_eq!(model.audit_plan(plan).unwrap(), vec![]);
    assert_eq!(plan.objective, plan.evaluate(inst, true).unwrap());
}

fn assert_detour_bound(inst: &Instance, plan: &Plan) {
    for (k, vp) in plan.vehicles.iter().enumerate() {
        let cost = inst
            .network()
            .path_from_nodes(&vp.route)
            .unwrap()
            .total_cost;
        assert!(cost <= inst.shortest_path(k).total_cost * inst.detour_factor());
    }
}

fn trips() -> impl Strategy<Value = Vec<(u32, u32, i64, i64, bool)>> {
    prop::collection::vec(
        (
            0u32..9,
            0u32..9,
            0i64..4,
            0i64..4,
            prop::bool::weighted(0.85),
        ),
        1..4,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_matches_oracle(
        trips in trips(),
        weights in prop::collection::vec((1i64..4, 1i64..3), 1..6),
        p in 0i64..4,
        eta_den in prop::sample::select(vec![4i64, 5, 10]),
        wait_num in 0i64..3,
    ) {
        let net = grid_with_weights(3, 3, &weights);
        let Some(inst) = small_instance(net, &trips, p, rat(1, eta_den), rat(wait_num, 20)) else { return Ok(()) };
        let cfg = SolverConfig::default();
        let exact = solve_exact(&inst, &cfg).unwrap();
        let oracle = solve_oracle(&inst, &cfg).unwrap();
        prop_assert_eq!(exact.objective, oracle.objective);
        let heuristic = solve_heuristic(&inst, &cfg).unwrap();
        prop_assert!(heuristic.objective >= exact.objective);
        for plan in [&exact, &oracle, &heuristic] {
            audit(&inst, plan);
            assert_detour_bound(&inst, plan);
        }
    }

    #[test]
    fn longer_waits_never_hurt(trips in trips(), weights in prop::collection::vec((1i64..4, 1i64..3), 1..6), p in 0i64..3, extra in 1i64..4) {
        let net = grid_with_weights(3, 3, &weights);
        // deadlines slack by the larger wait so both instances share them
        let trips: Vec<_> = trips.into_iter().map(|(o, d, t, _, c)| (o, d, t, p + extra, c)).collect();
        let Some(short) = small_instance(net.clone(), &trips, p, rat(1, 10), int(0)) else { return Ok(()) };
        let long = small_instance(net, &trips, p + extra, rat(1, 10), int(0)).unwrap();
        let cfg = SolverConfig::default();
        prop_assert!(solve_exact(&long, &cfg).unwrap().objective <= solve_exact(&short, &cfg).unwrap().objective);
    }

    #[test]
    fn coordination_dominates_ad_hoc(trips in trips(), p in 0i64..4) {
        let net = Arc::new(make_grid(3, 3, int(1), int(1)).unwrap());
        let Some(inst) = small_instance(net, &trips, p, rat(1, 10), int(0)) else { return Ok(()) };
        let baseline = simulate_opportunistic(&inst).unwrap();
        audit(&inst, &baseline);
        let cfg = SolverConfig::default();
        let heuristic = solve_heuristic(&inst, &cfg).unwrap();
        let exact = solve_exact(&inst, &cfg).unwrap();
        prop_assert!(heuristic.objective <= baseline.objective);
        prop_assert!(exact.objective <= heuristic.objective);
    }
}

#[test]
fn heuristic_close_to_exact_on_small_grids() {
    let net = Arc::new(make_grid(3, 3, int(1), int(1)).unwrap());
    let dist = DepartureDistribution::new(0.0, 10.0, 5.0, 2.0).unwrap();
    let cfg = SolverConfig::default();
    let mut close = 0;
    for seed in 0..20 {
        let inst = generate_case_study(net.clone(), 3, &dist, int(2), seed).unwrap();
        let exact = solve_exact(&inst, &cfg).unwrap().objective;
        let heuristic = solve_heuristic(&inst, &cfg).unwrap().objective;
        assert!(heuristic >= exact);
        if heuristic <= exact * rat(105, 100) {
            close += 1;
        }
    }
    assert!(
        close >= 18,
        "heuristic within 5% on only {close} of 20 instances"
    );
}

#[test]
fn monotone_in_wait_on_five_by_five() {
    let net = Arc::new(make_grid(5, 5, int(1), int(1)).unwrap());
    let dist = DepartureDistribution::new(0.0, 20.0, 10.0, 5.0).unwrap();
    let cfg = SolverConfig::default();
    for seed in 0..3 {
        let base = generate_case_study(net.clone(), 5, &dist, int(20), seed).unwrap();
        let mut last: Option<Rat> = None;
        for p in [0, 5, 10, 20] {
            let inst = Instance::new(
                net.clone(),
                base.vehicles().to_vec(),
                int(p),
                base.eta(),
                int(0),
            )
            .unwrap();
            let plan = solve_exact(&inst, &cfg).unwrap();
            audit(&inst, &plan);
            if let Some(prev) = last {
                assert!(plan.objective <= prev);
            }
            last = Some(plan.objective);
        }
    }
}

#[test]
fn solvers_are_deterministic() {
    let net = Arc::new(make_grid(4, 4, int(1), int(1)).unwrap());
    let dist = DepartureDistribution::new(0.0, 10.0, 5.0, 3.0).unwrap();
    let inst = generate_case_study(net, 6, &dist, int(4), 9).unwrap();
    let cfg = SolverConfig {
        seed: 3,
        ..Default::default()
    };
    assert_eq!(
        solve_exact(&inst, &cfg).unwrap(),
        solve_exact(&inst, &cfg).unwrap()
    );
    assert_eq!(
        solve_heuristic(&inst, &cfg).unwrap(),
        solve_heuristic(&inst, &cfg).unwrap()
    );
}

#[test]
fn fractional_delay_grid() {
    let net = Arc::new(make_grid(1, 4, int(1), rat(1, 2)).unwrap());
    let vehicles = vec![
        Vehicle::new(0, NodeId(0), NodeId(3), int(0), int(10)),
        Vehicle::new(1, NodeId(0), NodeId(3), rat(1, 2), int(10)),
    ];
    let inst = Instance::new(net, vehicles, int(1), rat(1, 10), int(0)).unwrap();
    let whole = solve_exact(&inst, &SolverConfig::default()).unwrap();
    assert!(whole.platoons.is_empty());
    let half = SolverConfig {
        delay_resolution: rat(1, 2),
        ..Default::default()
    };
    let plan = solve_exact(&inst, &half).unwrap();
    assert_eq!(plan.objective, int(3) - rat(3, 10) + int(3));
    assert_eq!(
        solve_oracle(&inst, &half).unwrap().objective,
        plan.objective
    );
    audit(&inst, &plan);
}
