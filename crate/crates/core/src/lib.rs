//! Lithium-ion cell simulation and estimation.
//!
//! * [`espm`]: single particle model with electrolyte dynamics, used as the plant.
//! * [`aging`]: SEI growth and the capacity / resistance coupling.
//! * [`observer`]: adaptive interconnected sliding-mode observer.
//! * [`ident`]: sensitivity, correlation, subset selection and fitting.
//! * [`harness`]: drive cycles, measurement corruption and twin experiments.

pub mod aging;
pub mod cycle;
pub mod error;
pub mod espm;
pub mod exec;
pub mod harness;
pub mod ident;
pub mod linalg;
pub mod observer;
pub mod ocp;
pub mod params;
pub mod props;

pub use cycle::DriveCycle;
pub use error::{Error, Result};
pub use exec::Execution;
pub use ocp::OcpTable;
pub use params::{CellParameters, Electrode, ParameterSet, SeiParameters};
