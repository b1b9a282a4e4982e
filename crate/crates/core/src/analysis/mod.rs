//! From bright counts to per-pulse cross-talk.

mod diffusion;
mod fidelity;
mod fit;
mod matrix;
mod oracle;

pub use diffusion::{
    density_expectation, density_fidelity, diffusion_density, random_walk_oracle,
    step_fidelity_loss, WalkEstimate,
};
pub use fidelity::{
    fidelity_from_counts, fidelity_point, predict_fidelity, wilson_half_width, FidelityCurve,
    FidelityPoint,
};
pub use fit::{decay_model, fit_decay, initial_fidelity, FitResult, UPPER_BOUND_DELTA_CHI2};
pub use matrix::{
    crosstalk_matrix, crosstalk_row, exact_crosstalk_matrix, is_next_neighbor,
    single_pulse_excitation, CrosstalkMatrix, MatrixEntry,
};
pub use oracle::{
    oracle_register, sequence_average_fidelity, three_way, Estimate, OracleComparison,
    OracleSettings,
};
