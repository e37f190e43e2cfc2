//! Trips, problem instances, the case-study generator and the instance file.

use std::fmt;
use std::path::Path as FsPath;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::{NetworkDocument, NodeId, Path, RoadNetwork};
use crate::rational::{self, rat, serde_rat, serde_rat_opt, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub origin: NodeId,
    pub destination: NodeId,
    /// Earliest departure from the origin, minutes.
    pub earliest_departure: Rat,
    /// Latest arrival at the destination, minutes.
    pub deadline: Rat,
    pub platoon_capable: bool,
    /// Per-vehicle waiting cost rate; falls back to the instance default.
    pub wait_cost: Option<Rat>,
}

impl Vehicle {
    pub fn new(
        id: u32,
        origin: NodeId,
        destination: NodeId,
        earliest_departure: Rat,
        deadline: Rat,
    ) -> Self {
        Vehicle {
            id: VehicleId(id),
            origin,
            destination,
            earliest_departure,
            deadline,
            platoon_capable: true,
            wait_cost: None,
        }
    }
}

/// A validated planning problem. Immutable once built.
///
/// Feasibility means every vehicle can reach its destination by its deadline
/// when it departs immediately along its (cost-)shortest path.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    network: Arc<RoadNetwork>,
    vehicles: Vec<Vehicle>,
    max_wait: Rat,
    eta: Rat,
    wait_cost: Rat,
    shortest: Vec<Path>,
}

impl Instance {
    pub fn new(
        network: Arc<RoadNetwork>,
        vehicles: Vec<Vehicle>,
        max_wait: Rat,
        eta: Rat,
        wait_cost: Rat,
    ) -> Result<Self> {
        if eta < Rat::zero() || eta >= Rat::one() {
            return Err(invalid("eta must lie in [0, 1)"));
        }
        if max_wait < Rat::zero() {
            return Err(invalid("maximum wait must be nonnegative"));
        }
        if wait_cost < Rat::zero() {
            return Err(invalid("waiting cost must be nonnegative"));
        }
        let mut seen = std::collections::HashSet::new();
        let mut shortest = Vec::with_capacity(vehicles.len());
        for v in &vehicles {
            if !seen.insert(v.id) {
                return Err(Error::Vehicle {
                    vehicle: v.id,
                    reason: "duplicate vehicle id".into(),
                });
            }
            for node in [v.origin, v.destination] {
                if !network.contains(node) {
                    return Err(Error::Reference {
                        vehicle: v.id,
                        node,
                    });
                }
            }
            if v.origin == v.destination {
                return Err(Error::Vehicle {
                    vehicle: v.id,
                    reason: "origin equals destination".into(),
                });
            }
            if v.wait_cost.is_some_and(|c| c < Rat::zero()) {
                return Err(Error::Vehicle {
                    vehicle: v.id,
                    reason: "negative waiting cost".into(),
                });
            }
            let path = network
                .shortest_path(v.origin, v.destination)
                .map_err(|e| match e {
                    Error::NoPath { .. } => Error::Vehicle {
                        vehicle: v.id,
                        reason: "destination unreachable".into(),
                    },
                    other => other,
                })?;
            let earliest_arrival = v.earliest_departure + path.total_time;
            if v.deadline < earliest_arrival {
                return Err(Error::Vehicle {
                    vehicle: v.id,
                    reason: format!(
                        "deadline {} is before the earliest possible arrival {}",
                        v.deadline, earliest_arrival
                    ),
                });
            }
            shortest.push(path);
        }
        Ok(Instance {
            network,
            vehicles,
            max_wait,
            eta,
            wait_cost,
            shortest,
        })
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.network
    }

    pub fn shared_network(&self) -> Arc<RoadNetwork> {
        Arc::clone(&self.network)
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    /// Upper bound `p` on departure delay, minutes.
    pub fn max_wait(&self) -> Rat {
        self.max_wait
    }

    /// Fraction of edge fuel a follower saves.
    pub fn eta(&self) -> Rat {
        self.eta
    }

    pub fn default_wait_cost(&self) -> Rat {
        self.wait_cost
    }

    pub fn wait_cost(&self, vehicle: usize) -> Rat {
        self.vehicles[vehicle].wait_cost.unwrap_or(self.wait_cost)
    }

    /// Deterministic shortest path of the vehicle at position `vehicle`.
    pub fn shortest_path(&self, vehicle: usize) -> &Path {
        &self.shortest[vehicle]
    }

    /// Largest route-cost multiple a platooning detour can ever justify: `1/(1-eta)`.
    pub fn detour_factor(&self) -> Rat {
        Rat::one() / (Rat::one() - self.eta)
    }

    pub fn position_of(&self, id: VehicleId) -> Option<usize> {
        self.vehicles.iter().position(|v| v.id == id)
    }

    pub fn with_eta(self, eta: Rat) -> Result<Self> {
        Instance::new(
            self.network,
            self.vehicles,
            self.max_wait,
            eta,
            self.wait_cost,
        )
    }

    pub fn with_wait_cost(self, wait_cost: Rat) -> Result<Self> {
        Instance::new(
            self.network,
            self.vehicles,
            self.max_wait,
            self.eta,
            wait_cost,
        )
    }
}

/// Normal distribution truncated to `[low, high]`, in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepartureDistribution {
    pub low: f64,
    pub high: f64,
    pub mean: f64,
    pub std_dev: f64,
    /// Sampled departures are rounded to this step (minutes); `None` keeps them as drawn
    /// at microsecond-of-a-minute precision.
    #[serde(default = "default_granularity", with = "serde_rat_opt")]
    pub granularity: Option<Rat>,
}

fn default_granularity() -> Option<Rat> {
    Some(Rat::one())
}

impl DepartureDistribution {
    pub fn new(low: f64, high: f64, mean: f64, std_dev: f64) -> Result<Self> {
        let dist = DepartureDistribution {
            low,
            high,
            mean,
            std_dev,
            granularity: default_granularity(),
        };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low.is_finite()
            && self.high.is_finite()
            && self.mean.is_finite()
            && self.std_dev.is_finite())
        {
            return Err(invalid("departure distribution parameters must be finite"));
        }
        if self.low >= self.high {
            return Err(invalid("departure support needs low < high"));
        }
        if self.std_dev < 0.0 {
            return Err(invalid("standard deviation must be nonnegative"));
        }
        if self.std_dev == 0.0 && !(self.low..=self.high).contains(&self.mean) {
            return Err(invalid(
                "degenerate distribution must sit inside its support",
            ));
        }
        // keeps rejection sampling's acceptance rate away from zero
        if self.mean < self.low - 6.0 * self.std_dev || self.mean > self.high + 6.0 * self.std_dev {
            return Err(invalid("support carries negligible probability mass"));
        }
        if self.granularity.is_some_and(|g| g <= Rat::zero()) {
            return Err(invalid("granularity must be positive"));
        }
        Ok(())
    }
}

/// One draw from the truncated normal, by rejection from the untruncated normal.
pub fn sample_truncated_normal<R: Rng + ?Sized>(dist: &DepartureDistribution, rng: &mut R) -> f64 {
    if dist.std_dev == 0.0 {
        return dist.mean;
    }
    let normal = Normal::new(dist.mean, dist.std_dev).expect("validated standard deviation");
    loop {
        let x = normal.sample(rng);
        if (dist.low..=dist.high).contains(&x) {
            return x;
        }
    }
}

fn departure_minutes(dist: &DepartureDistribution, raw: f64) -> Rat {
    let step = dist.granularity.unwrap_or_else(|| rat(1, 1_000_000));
    let value = rational::round_to(rational::from_f64(raw).expect("finite sample"), step);
    // rounding can step just outside the support
    let low = rational::from_f64(dist.low).expect("finite bound");
    let high = rational::from_f64(dist.high).expect("finite bound");
    value.clamp(low, high)
}

/// Random instance in the style of the grid case study: uniform O/D pairs,
/// truncated-normal departures and deadlines `T_O + shortest time + p`.
pub fn generate_case_study(
    network: Arc<RoadNetwork>,
    n_vehicles: usize,
    dist: &DepartureDistribution,
    max_wait: Rat,
    seed: u64,
) -> Result<Instance> {
    if n_vehicles == 0 {
        return Err(invalid("need at least one vehicle"));
    }
    if network.nodes().len() < 2 {
        return Err(invalid("network needs at least two nodes"));
    }
    if max_wait < Rat::zero() {
        return Err(invalid("maximum wait must be nonnegative"));
    }
    dist.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = network.nodes();
    let attempts_per_vehicle = 64 * nodes.len();
    let mut vehicles = Vec::with_capacity(n_vehicles);
    for id in 0..n_vehicles as u32 {
        let mut picked = None;
        for _ in 0..attempts_per_vehicle {
            let o = *nodes.choose(&mut rng).expect("nonempty");
            let d = *nodes.choose(&mut rng).expect("nonempty");
            if o == d {
                continue;
            }
            if let Ok(path) = network.shortest_path(o, d) {
                picked = Some((o, d, path.total_time));
                break;
            }
        }
        let (origin, destination, travel) =
            picked.ok_or_else(|| invalid("no reachable origin/destination pair found"))?;
        let departure = departure_minutes(dist, sample_truncated_normal(dist, &mut rng));
        vehicles.push(Vehicle::new(
            id,
            origin,
            destination,
            departure,
            departure + travel + max_wait,
        ));
    }
    Instance::new(network, vehicles, max_wait, rat(1, 10), Rat::zero())
}

/// Where the instance document keeps its network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSource {
    Path(String),
    Inline(NetworkDocument),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub network: NetworkSource,
    #[serde(with = "serde_rat")]
    pub eta: Rat,
    #[serde(with = "serde_rat", default = "Rat::zero")]
    pub epsilon: Rat,
    #[serde(with = "serde_rat")]
    pub p: Rat,
    pub vehicles: Vec<VehicleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleRecord {
    pub id: VehicleId,
    pub origin: NodeId,
    pub dest: NodeId,
    #[serde(with = "serde_rat")]
    pub t_origin: Rat,
    #[serde(with = "serde_rat")]
    pub t_dest: Rat,
    #[serde(default = "default_capable")]
    pub platoon_capable: bool,
    #[serde(
        default,
        with = "serde_rat_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub epsilon: Option<Rat>,
}

fn default_capable() -> bool {
    true
}

pub fn save_instance(inst: &Instance) -> Result<String> {
    let doc = InstanceDocument {
        network: NetworkSource::Inline(inst.network.to_document()),
        eta: inst.eta,
        epsilon: inst.wait_cost,
        p: inst.max_wait,
        vehicles: inst
            .vehicles
            .iter()
            .map(|v| VehicleRecord {
                id: v.id,
                origin: v.origin,
                dest: v.destination,
                t_origin: v.earliest_departure,
                t_dest: v.deadline,
                platoon_capable: v.platoon_capable,
                epsilon: v.wait_cost,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parses an instance document. A network given as a path is resolved
/// relative to `base_dir` when one is supplied.
pub fn load_instance(text: &str, base_dir: Option<&FsPath>) -> Result<Instance> {
    let doc: InstanceDocument =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    let network = match doc.network {
        NetworkSource::Inline(net) => RoadNetwork::from_document(net)?,
        NetworkSource::Path(path) => {
            let full = match base_dir {
                Some(dir) => dir.join(&path),
                None => path.into(),
            };
            RoadNetwork::from_json(&std::fs::read_to_string(full)?)?
        }
    };
    let vehicles = doc
        .vehicles
        .into_iter()
        .map(|r| Vehicle {
            id: r.id,
            origin: r.origin,
            destination: r.dest,
            earliest_departure: r.t_origin,
            deadline: r.t_dest,
            platoon_capable: r.platoon_capable,
            wait_cost: r.epsilon,
        })
        .collect();
    Instance::new(Arc::new(network), vehicles, doc.p, doc.eta, doc.epsilon)
}

pub fn read_instance(path: &FsPath) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    load_instance(&text, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{grid_node, make_grid};
    use crate::rational::int;
    use rand::SeedableRng;

    fn grid(n: u32) -> Arc<RoadNetwork> {
        Arc::new(make_grid(n, n, int(1), int(1)).unwrap())
    }

    fn manhattan(a: NodeId, b: NodeId, cols: u32) -> i64 {
        let (ar, ac) = ((a.0 / cols) as i64, (a.0 % cols) as i64);
        let (br, bc) = ((b.0 / cols) as i64, (b.0 % cols) as i64);
        (ar - br).abs() + (ac - bc).abs()
    }

    #[test]
    fn case_study_deadlines() {
        let dist = DepartureDistribution::new(0.0, 100.0, 50.0, 20.0).unwrap();
        let inst = generate_case_study(grid(10), 50, &dist, int(10), 7).unwrap();
        assert_eq!(inst.len(), 50);
        for v in inst.vehicles() {
            assert_ne!(v.origin, v.destination);
            let slack =
                v.deadline - v.earliest_departure - int(manhattan(v.origin, v.destination, 10));
            assert_eq!(slack, int(10));
            assert!(v.earliest_departure >= Rat::zero() && v.earliest_departure <= int(100));
            assert!(v.earliest_departure.is_integer());
        }
    }

    #[test]
    fn zero_wait_means_zero_slack() {
        let dist = DepartureDistribution::new(0.0, 100.0, 50.0, 10.0).unwrap();
        let inst = generate_case_study(grid(5), 20, &dist, Rat::zero(), 3).unwrap();
        for (k, v) in inst.vehicles().iter().enumerate() {
            assert_eq!(
                v.deadline,
                v.earliest_departure + inst.shortest_path(k).total_time
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let dist = DepartureDistribution::new(0.0, 100.0, 50.0, 10.0).unwrap();
        let a =
            save_instance(&generate_case_study(grid(6), 12, &dist, int(5), 11).unwrap()).unwrap();
        let b =
            save_instance(&generate_case_study(grid(6), 12, &dist, int(5), 11).unwrap()).unwrap();
        assert_eq!(a, b);
        let c =
            save_instance(&generate_case_study(grid(6), 12, &dist, int(5), 12).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generation_rejects_degenerate_inputs() {
        let dist = DepartureDistribution::new(0.0, 100.0, 50.0, 10.0).unwrap();
        assert!(generate_case_study(grid(1), 3, &dist, int(1), 0).is_err());
        assert!(generate_case_study(grid(3), 0, &dist, int(1), 0).is_err());
        let isolated = Arc::new(RoadNetwork::new(vec![NodeId(0), NodeId(1)], vec![]).unwrap());
        assert!(generate_case_study(isolated, 1, &dist, int(1), 0).is_err());
    }

    #[test]
    fn degenerate_distribution() {
        let dist = DepartureDistribution::new(0.0, 100.0, 50.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_truncated_normal(&dist, &mut rng), 50.0);
        }
    }

    #[test]
    fn truncated_normal_stays_in_support_and_centred() {
        let dist = DepartureDistribution::new(0.0, 100.0, 50.0, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = sample_truncated_normal(&dist, &mut rng);
            assert!((0.0..=100.0).contains(&x));
            sum += x;
        }
        let mean = sum / n as f64;
        assert!((mean - 50.0).abs() < 0.2, "sample mean {mean}");
        // heavy truncation still respects the support
        let wide = DepartureDistribution::new(0.0, 100.0, 50.0, 200.0).unwrap();
        for _ in 0..1000 {
            assert!((0.0..=100.0).contains(&sample_truncated_normal(&wide, &mut rng)));
        }
    }

    #[test]
    fn invalid_distributions() {
        assert!(DepartureDistribution::new(10.0, 10.0, 10.0, 1.0).is_err());
        assert!(DepartureDistribution::new(0.0, 10.0, 5.0, -1.0).is_err());
        assert!(DepartureDistribution::new(0.0, 10.0, 500.0, 1.0).is_err());
    }

    #[test]
    fn round_trip() {
        let dist = DepartureDistribution::new(0.0, 100.0, 50.0, 15.0).unwrap();
        let mut inst = generate_case_study(grid(4), 6, &dist, int(3), 5).unwrap();
        let mut vehicles = inst.vehicles().to_vec();
        vehicles[1].platoon_capable = false;
        vehicles[2].wait_cost = Some(rat(1, 3));
        inst = Instance::new(
            inst.shared_network(),
            vehicles,
            int(3),
            rat(1, 10),
            rat(1, 7),
        )
        .unwrap();
        let text = save_instance(&inst).unwrap();
        assert_eq!(load_instance(&text, None).unwrap(), inst);
    }

    #[test]
    fn infeasible_deadline_names_vehicle() {
        let net = grid(3);
        let v = Vehicle::new(17, grid_node(0, 0, 3), grid_node(2, 2, 3), int(10), int(13));
        match Instance::new(net, vec![v], int(0), rat(1, 10), Rat::zero()) {
            Err(Error::Vehicle { vehicle, .. }) => assert_eq!(vehicle, VehicleId(17)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_node_is_a_reference_error() {
        let text = r#"{"network":{"nodes":[0,1],"edges":[{"from":0,"to":1,"cost":1,"time":1}]},
            "eta":0.1,"p":0,"vehicles":[{"id":4,"origin":0,"dest":9,"t_origin":0,"t_dest":5}]}"#;
        match load_instance(text, None) {
            Err(Error::Reference { vehicle, node }) => {
                assert_eq!((vehicle, node), (VehicleId(4), NodeId(9)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(
            load_instance("{\"eta\": 0.1}", None),
            Err(Error::Schema(_))
        ));
        let bad_eta = r#"{"network":{"nodes":[0,1],"edges":[]},"eta":1.0,"p":0,"vehicles":[]}"#;
        assert!(matches!(
            load_instance(bad_eta, None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn network_by_path() {
        let dir = std::env::temp_dir().join(format!("platoon-inst-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(
            dir.join("net.json"),
            make_grid(2, 2, int(1), int(1)).unwrap().to_json().unwrap(),
        )
        .unwrap();
        let text = r#"{"network":"net.json","eta":0.1,"p":2,
            "vehicles":[{"id":0,"origin":0,"dest":3,"t_origin":1.5,"t_dest":5.5}]}"#;
        let inst = load_instance(text, Some(&dir)).unwrap();
        assert_eq!(inst.vehicles()[0].earliest_departure, rat(3, 2));
        std::fs::remove_dir_all(dir).ok();
    }
}
