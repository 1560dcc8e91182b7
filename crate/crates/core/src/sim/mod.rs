//! Discrete-event simulation of the zoned network.

pub mod channel;
mod engine;
pub mod events;
pub mod mobility;
pub mod routing;

pub use engine::{
    peripheral_spots, run, run_with_seed, NodeSpec, SimError, SimOutput, Simulator, Topology,
    Traffic,
};
