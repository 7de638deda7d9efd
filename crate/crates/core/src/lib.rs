//! Three-stage supply chain simulation: stores, distribution centers and
//! suppliers under `(s, S)` inventory control with stochastic customer
//! demand, running on the [`supsim_des`] kernel.
//!
//! * [`stochastic`]: keyed random streams, exponential and triangular variates
//! * [`policy`]: inventory position, moving-average forecast, safety stock, review
//! * [`network`] and [`model`]: topology, order flow, shipments, statistics
//! * [`experiments`]: replications, factorial sweep, run-length analysis
//! * [`scenario`] and [`export`]: input and output file formats

pub mod calendar;
pub mod experiments;
pub mod export;
pub mod model;
pub mod network;
pub mod policy;
pub mod scenario;
pub mod stats;
pub mod stochastic;

pub use experiments::{replicate, run_scenario, ReplicateOptions, ScenarioResult};
pub use model::{simulate, RunControl, RunOutput, SimError, SimOptions};
pub use scenario::{ConfigError, ScenarioConfig};
