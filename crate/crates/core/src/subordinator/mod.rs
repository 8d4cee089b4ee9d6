//! Subordinators: Bernstein functions, sample paths and the regularised
//! time change `ℓ^ε`.

mod bernstein;
mod path;
mod sampler;

pub use bernstein::{BernsteinSpec, DensityFn, H1Check, LevyDensity};
pub use path::{inverse_time, regularize, sample_path, sample_path_with, sample_paths, SubordinatorPath};
pub use sampler::{positive_stable, IncrementSampler, JumpTable, SamplerConfig};
