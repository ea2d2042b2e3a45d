//! Positive-P phase-space simulation of driven, dissipative spin-boson
//! (Dicke) networks.
//!
//! Each network site carries a photon mode and a spin-`s` collective atom.
//! The density operator is sampled by trajectories of the complex
//! quadruple `(α, β, z, w)` per site, where `(α, β)` label bosonic coherent
//! dyads and `(z, w)` label spin coherent dyads in stereographic
//! coordinates. Photon amplitudes, drives and bath occupations are all in
//! rescaled form (photon number per unit spin), which makes the drift
//! independent of `s` and leaves the quantum noise proportional to `1/s`.
//!
//! Variable ordering within a site is fixed to `(α, β, z, w)` everywhere,
//! including the rows and columns of every 4×4 diffusion and noise matrix.
//!
//! Crate layout:
//!
//! - [`model`]: network description, simulation configuration, validation.
//! - [`dynamics`]: drift, diffusion blocks and their analytic square roots,
//!   noise sampling, regularization and the spherical classical drift.
//! - [`sde`]: fixed-step Itô Euler–Maruyama integrators with breakdown
//!   detection.
//! - [`observables`]: moments, currents, homodyne signal, ensemble
//!   reductions and histograms.
//! - [`ensemble`]: deterministic parallel ensembles and parameter scans.
//! - [`oracle`]: exact truncated-Fock reference (dense master equation,
//!   quantum-jump trajectories, operator-identity checks).
//! - [`io`]: configuration files, CSV output, the self-verification suite.

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};

/// Double-precision complex number used throughout.
pub type C64 = num_complex::Complex64;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Guard radius for `1 + w z` (or `1 + z w`) denominators.
pub const POLE_TOLERANCE: f64 = 1e-14;
