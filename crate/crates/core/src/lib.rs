//! Simulation and verification toolkit for McKean-Vlasov stochastic
//! differential equations driven by Lévy noise,
//!
//! ```text
//! dX_t = b(t, X_t, Law(X_t)) dt + σ(t) dZ_t,
//! ```
//!
//! with `Z` a Lévy process (in particular a subordinate Brownian motion
//! `W_{S_t}`).
//!
//! The crate is organised bottom-up:
//!
//! * [`subordinator`]: Bernstein functions, subordinator paths and their
//!   regularisation `ℓ^ε`.
//! * [`levy_noise`]: Lévy triplets and increment generation.
//! * [`sde_core`]: Euler stepping for distribution-independent SDEs.
//! * [`mkv`]: interacting particles and Picard iteration for the
//!   distribution-dependent equation.
//! * [`metrics`]: empirical Wasserstein distances.
//! * [`ergodicity`]: Wasserstein contraction and invariant measures.
//! * [`harnack`]: coupling by change of measure, log/power Harnack and
//!   entropy-cost checks.
//! * [`fpke`]: finite-difference solver for the nonlinear fractional
//!   Fokker-Planck equation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod ergodicity;
pub mod error;
pub mod fpke;
pub mod grid;
pub mod harnack;
pub mod levy_noise;
pub mod metrics;
pub mod mkv;
pub mod quad;
pub mod rng;
pub mod sde_core;
pub mod stats;
pub mod subordinator;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use rng::Streams;
