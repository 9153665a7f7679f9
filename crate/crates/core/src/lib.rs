//! Packet-forwarding fairness management for community wireless mesh
//! networks: the MPIFA incentive algorithm deployed either behind a single
//! central server or behind per-zone servers, with a deterministic
//! discrete-event simulator and the measurement tooling to compare the two
//! schemes across network sizes and densities.

pub mod topology;
pub mod config;
pub mod events;
pub mod mpifa;
pub mod sim;
pub mod zoning;
