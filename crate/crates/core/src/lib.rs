//! Risk-aware routing for hazardous-cargo fleets.
//!
//! The pipeline runs in stages: [`domain`] loads the road network and the
//! routing instance, [`riskprob`] turns traffic and road-type statistics into
//! per-arc accident probabilities, [`mcsim`] prices those probabilities into
//! expected accident costs by Monte Carlo, [`solver`] builds vehicle routes
//! under the weighted cost `(1 - α)·logistics + α·risk`, and [`sweep`] traces
//! the trade-off across a grid of α values.

pub mod domain;
pub mod mcsim;
pub mod riskprob;
pub mod solver;
pub mod sweep;
pub mod config;
pub mod pipeline;
pub mod service;
