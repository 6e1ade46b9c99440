//! State-space models and the system-theoretic quantities built from them.

mod blocks;
mod frequency;
mod gramian;
mod model;
mod norms;

pub use blocks::{
    build_hankel, build_toeplitz, hankel_from_markov, markov_parameters, noise_markov_parameters,
    observability, padded_diff_norm, BlockMatrix, ToeplitzKernel,
};
pub use frequency::{
    complex_sigma_max, hinf_distance, hinf_norm, maximize_gain, transfer_function,
    FrequencyResponse, DEFAULT_HINF_GRID,
};
pub use gramian::{
    balanced_realization, balanced_truncate, hankel_singular_values, solve_discrete_lyapunov,
    GramianPair, MINIMALITY_TOL,
};
pub use model::StateSpaceModel;
pub(crate) use model::{matrix_to_rows, rows_to_matrix, spectral_radius};
pub use norms::{
    delta_plus, noise_to_signal, tail_horizon, toeplitz_horizon, NoiseToSignal, DEFAULT_TAIL_TOL,
    MIN_TOEPLITZ_HORIZON,
};
