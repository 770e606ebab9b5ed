//! Discrete structural causal models for criticality analysis.

pub mod context;
pub mod engine;
pub mod graph;
pub mod indicators;
pub mod io;
pub mod metrics;
pub mod model;
