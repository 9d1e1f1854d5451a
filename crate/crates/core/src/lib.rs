//! Simulation and maximum-likelihood inference for M/G/s queues whose
//! customers may balk without ever being observed.
//!
//! The crate covers the full pipeline: event-driven simulation of the
//! queue ([`sim`]), reconstruction of the estimator's observation sequence
//! from arrival/departure epochs alone ([`reconstruct`]), the conditional
//! likelihood with analytic gradients ([`likelihood`]), the estimators for
//! the potential arrival rate and the patience-level distribution
//! ([`estimate`]), analytic stationary oracles for single-server
//! validation ([`stationary`]), and a seeded replication harness
//! ([`harness`]).

pub mod dist;
pub mod numeric;

pub use dist::{ghe_feasible, DistError, PatienceModel, ServiceModel};
