//! Greenberg-Hastings cyclic cellular automata on geometric sensor networks.
//!
//! The crate builds hallway-shaped planar domains, samples sensor networks
//! on them, runs the cyclic automaton, and analyzes the resulting wave
//! patterns with integer homology: seeds, defects, winding degrees,
//! cohomology classes, pulse programming, and a pursuit-evasion checker.
//!
//! See the `examples/` directory for one runnable program per capability;
//! the `ghm` binary wraps the same entry points behind scenario files.

pub mod engine;
pub mod evasion;
pub mod geometry;
pub mod network;
pub mod scenario;
pub mod stochastic;
pub mod topology;
pub mod waves;

pub use engine::State;
pub use geometry::{build_domain, HallwayDomain, Rect};
pub use network::Network;
