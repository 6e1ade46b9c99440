//! Identification of low-order approximations of stable linear systems from a
//! single noisy input–output trajectory.
//!
//! The pipeline fits a block Hankel matrix of Markov parameters by least
//! squares ([`ols`]), picks the window and order from the data
//! ([`selection`]), and recovers state-space parameters from the SVD of the
//! estimate ([`realize`]). [`lti`] holds the ground-truth side: norms,
//! gramians and balanced truncation. [`pipeline`] chains the stages.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod linalg;
pub mod lti;
pub mod ols;
pub mod pipeline;
pub mod realize;
pub mod selection;
pub mod simulate;

mod serde_rows;

pub use error::{Result, SysIdError};
pub use lti::{BlockMatrix, GramianPair, StateSpaceModel};
pub use ols::HankelEstimate;
pub use pipeline::{identify, Identification};
pub use realize::{ModelDistance, RealizedModel};
pub use selection::{SelectionConfig, SelectionTrace};
pub use simulate::{NoiseSpec, Trajectory};
