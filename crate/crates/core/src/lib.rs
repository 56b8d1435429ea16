//! Frequency-resolved twin-beam moments and quantum Fisher information for
//! absorption sensing with undetected photons.
//!
//! The crate models three sensing configurations built around continuous-wave
//! parametric down-conversion:
//!
//! - an SU(1,1) interferometer (two squeezers with beamsplitter loss between them),
//! - an induced-coherence (IC) setup where only the idler seeds the second
//!   squeezer together with a vacuum ancilla,
//! - a distributed-loss (DL) source where attenuation happens inside the
//!   nonlinear region itself.
//!
//! From the second-order moments of these configurations the [`qfi`] module
//! builds Gaussian covariance matrices and evaluates the quantum Fisher
//! information for full, two-mode, and single-mode detection access, and the
//! [`sweep`] module drives deterministic parameter sweeps over loss and gain.
//!
//! Units are fixed project-wide: lengths in nm, wavevectors and decay rates in
//! nm^-1, frequency detunings in rad/s.

#![forbid(unsafe_code)]

pub mod configurations;
pub mod qfi;
pub mod spectral;
pub mod sweep;
pub mod twinbeam;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("invalid dispersion profile: {0}")]
    InvalidProfile(String),
    #[error("no phase-matched point: sigma_K keeps a constant nonzero sign on the grid")]
    NoPhaseMatchedPoint,
    #[error("invalid loss channel: {0}")]
    InvalidChannel(String),
    #[error("quadrature failed to converge to {tol:e} after {doublings} doublings")]
    QuadratureNotConverged { tol: f64, doublings: usize },
    #[error("unphysical covariance: min symplectic eigenvalue {min_eig} < 1")]
    UnphysicalState { min_eig: f64 },
    #[error("pure-state singularity in two-mode QFI (|det gamma - 1| = {det_dist:e})")]
    PureStateSingularity { det_dist: f64 },
    #[error("ill-conditioned (1 + gamma^2): condition estimate {cond:e}")]
    IllConditioned { cond: f64 },
    #[error("invalid fit grid: {0}")]
    InvalidFitGrid(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
