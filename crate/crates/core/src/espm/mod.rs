//! Enhanced single particle model: the simulated plant.

pub mod config;
pub mod electrolyte;
pub mod model;
pub mod solid;
pub mod state;

pub use config::{DiscretizationConfig, Integrator};
pub use electrolyte::{ElectrolyteGrid, Region};
pub use model::{
    electrolyte_resistance, exchange_current, overpotential, Cutoffs, ElectrolyteMode, EspmModel, Trajectory,
};
pub use solid::{build_solid_system, SolidOperator};
pub use state::{EspmState, NOMINAL_CE};
