//! Coordinated routing and departure-time planning for platooning vehicles.
//!
//! The crate builds the coordination model for a set of trips on a road
//! network, solves it (exact branch-and-bound, a greedy/local-search
//! heuristic, and an exhaustive oracle for small cases), simulates the
//! uncoordinated ad hoc baseline, and reports platooning metrics.

pub mod adhoc;
pub mod error;
pub mod instance;
pub mod metrics;
pub mod model;
pub mod network;
pub mod plan;
pub mod rational;
pub mod solver;

pub use error::{Error, Result};
pub use instance::{Instance, Vehicle, VehicleId};
pub use network::{EdgeId, NodeId, Path, RoadNetwork};
pub use rational::Rat;
