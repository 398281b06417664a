//! Local identifiability and parameter fitting.
//!
//! Sensitivities are finite differences of voltage and both electrode SOCs with
//! respect to the logarithm of each parameter. Columns are ranked by norm, compared
//! by cosine similarity, and walked greedily to pick a well-conditioned subset,
//! which is then fitted to data by a derivative-free optimiser.

pub mod analysis;
pub mod fit;
pub mod optimize;
pub mod sensitivity;
pub mod sim;
pub mod vector;

pub use analysis::{
    analyze, correlation_matrix, multi_vs_single_output_norms, subset_select, Analysis, CorrelationMatrix, Exclusion,
    NormTable, RankedNorm, Subset, SubsetConfig,
};
pub use fit::{
    coulomb_count_soc, fit, fit_cost, Cost, FitData, FitReport, FitWeights, DEFAULT_BUDGET, INFEASIBLE_COST,
};
pub use optimize::{DifferentialEvolution, Minimum, NelderMead, Optimizer};
pub use sensitivity::{sensitivity_matrix, Scheme, SensitivityConfig, SensitivityMatrix};
pub use sim::{c_rate_discharge, one_c_profile, pulse_train, ModelSetup, Outputs, ONE_C_DURATION};
pub use vector::{parse_param_list, ParamId, ParameterVector};
