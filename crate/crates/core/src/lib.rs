//! Respondent-driven sampling (RDS) for hidden-population counts.
//!
//! The crate covers the whole workflow: simulate attributed contact networks
//! from an exponential-family random graph model, run RDS recruitment on them,
//! estimate the unsheltered share and total with bootstrap and delta-method
//! intervals, sweep sample sizes for power analysis, and fit the ARIMA
//! comparison model for the visual count.

pub mod bootstrap;
pub mod cli;
pub mod ergm;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod linalg;
pub mod pipeline;
pub mod power;
pub mod rds;
pub mod reference;
pub mod rng;
pub mod timeseries;

pub use error::{Error, Result};
pub use graph::{AttributedNetwork, Group, NodeAttributeSchema, NodeAttributes};
