//! Driven three-level atoms: Lindblad master equations for the ladder, V and Λ
//! configurations, the dressed-basis maps that make pairs of them equivalent, and the
//! photon statistics (intensity correlations, waiting times, spectra, quantum jumps)
//! that the equivalence preserves.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod equivalence;
pub mod error;
pub mod linalg;
pub mod observables;
pub mod state;
pub mod systems;
pub mod tolerances;

pub use dynamics::{liouvillian, propagate, propagate_series, steady_state, Liouvillian};
pub use equivalence::{map_fig1a_to_fig1b, map_fig2a_to_fig2b, map_to_partner, verify_equivalence, EquivalenceMap};
pub use error::{Error, Result};
pub use state::{DensityMatrix, InitialState};
pub use systems::{Configuration, LindbladModel, SystemParams};
