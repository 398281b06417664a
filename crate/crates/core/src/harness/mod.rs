//! Experiment plumbing: surrogate drive cycles, sensor corruption and twin runs.

pub mod corrupt;
pub mod cycles;
pub mod twin;

pub use corrupt::{corrupt, CorruptionSpec};
pub use cycles::{udds2_like, us06_like};
pub use twin::{
    twin_experiment, twin_experiment_to_dir, twin_experiment_with_states, DescentReport, ObserverInit, PlantConfig,
    PlantHealth, TwinConfig, TwinResult, TwinSummary,
};
