//! Finite-difference solver for the one-dimensional nonlinear
//! Fokker–Planck–Kolmogorov equation with generator `-(−Δ/2)^α + b·∇`,
//! and its cross-checks against particle systems.

mod checks;
mod operator;
mod reference;
mod solver;

pub use checks::*;
pub use operator::{c_alpha, frac_laplacian_apply, frac_laplacian_quadrature, lattice_weights, FracLaplacian, Grid1D};
pub use reference::stable_density;
pub use solver::{gaussian_density, initial_density, DensityField, FpkeRun, FpkeSolver, StepStats};
