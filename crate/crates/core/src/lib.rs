//! Bi-level model predictive control for a multi-stage production line:
//! a daily price optimizer on top of an hourly mixed-integer scheduler that
//! trades grid energy cost against on-site renewable use.
//!
//! The crate is self-contained: it ships its own sparse interior-point QP
//! solver ([`qp`]) and a branch-and-bound MIQP solver ([`miqp`]) on top of it.

pub mod error;
pub mod io;
pub mod linalg;
pub mod lmpc;
pub mod miqp;
pub mod model;
pub mod pricing;
pub mod qp;
pub mod random;
pub mod sim;

pub use error::{IoError, LmpcError, MiqpError, ModelError, PricingError, QpError, SimError};
pub use lmpc::{LmpcInstance, LmpcParams, LmpcSolution, LmpcWeights};
pub use miqp::{BnbConfig, MiqpProblem, MiqpSolution, MiqpStatus};
pub use model::{
    BufferParams, ElasticityParams, EnergySeries, HorizonConfig, MachineParams, NetworkTopology, PlantState,
    SlackParams,
};
pub use pricing::{PricingConfig, PricingResult};
pub use qp::{QpOptions, QpProblem, QpSolution, QpStatus};
pub use sim::{DayRecord, HourRecord, Scenario, ScenarioConfig, SimulationReport};
