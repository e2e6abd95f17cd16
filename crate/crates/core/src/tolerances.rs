//! Pinned numerical tolerances shared by the test suites and the command-line checks.

/// Max Frobenius distance between mapped density-matrix trajectories.
pub const EQUIVALENCE: f64 = 1e-8;
/// Pointwise agreement of g² and waiting-time curves of a mapped pair.
pub const PHOTON_STATISTICS: f64 = 1e-8;
/// Spectrum agreement of a mapped pair, relative to the spectrum maximum.
pub const SPECTRUM_RELATIVE: f64 = 1e-6;
/// Relative tolerance on the 3:1 Mollow central-to-sideband height ratio.
pub const MOLLOW_RATIO: f64 = 0.05;
/// Excited population and emission rate of a dark steady state.
pub const DARK_STATE: f64 = 1e-10;
/// Significance level of the two-sample test on dark-period lengths.
pub const KS_ALPHA: f64 = 0.01;
/// Allowed deviation of Monte Carlo populations, in standard errors.
pub const MC_SIGMAS: f64 = 3.0;
/// Largest valley-to-mode ratio in the smoothed log-gap histogram that counts as bimodal.
pub const BIMODAL_DIP: f64 = 0.5;
/// `|Tr ρ − 1|` of any propagated state.
pub const TRACE: f64 = 1e-9;
/// Most negative eigenvalue allowed for any propagated state.
pub const POSITIVITY: f64 = 1e-9;
/// `‖vec(I)† L‖` for any assembled Liouvillian.
pub const LEFT_NULL_RESIDUAL: f64 = 1e-12;
