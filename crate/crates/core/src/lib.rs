//! Boundary laws, exact inference and Monte Carlo estimators for ferromagnetic
//! finite-spin models (Potts, clock and field-perturbed clock models) on
//! Cayley trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: model specifications, transfer matrices and closed-form
//!   constants (`δ₀`, `ε₁`, `λ(p₁)`, `ε₂`, circulant spectra).
//! * [`boundary_law`]: homogeneous boundary-law solutions (free and
//!   central states) and the induced tree-indexed Markov chain kernels.
//! * [`geometry`]: implicit Cayley-tree balls, vertex addressing,
//!   connected-subset enumeration and thinned branch plans.
//! * [`exact_gibbs`]: message passing on finite balls, Hamiltonians,
//!   excess energies and the finite-volume Peierls ledger.
//! * [`sampler`]: reproducible broadcast sampling with counter-based
//!   per-vertex randomness and truncated bad-event detection.
//! * [`estimators`]: Monte Carlo experiments with confidence intervals.
//! * [`oracle`]: brute-force ground truth for tiny instances.
//! * [`config`] and [`verify`]: text configuration and the verification
//!   matrix surfaced by the command-line front end.

pub mod boundary_law;
pub mod config;
pub mod error;
pub mod estimators;
pub mod exact_gibbs;
pub mod geometry;
pub mod model;
pub mod oracle;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};

/// A spin value in `{0, …, q−1}`.
pub type Spin = usize;
