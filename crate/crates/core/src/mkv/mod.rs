//! McKean–Vlasov equations: interacting particles and Picard iteration.

mod drift;
mod ensemble;
mod particles;
mod picard;

pub use drift::{DriftSpec, Law, LawSummary, MkvDrift};
pub use ensemble::{law_at, InitialLaw, LawFlow, ParticleEnsemble, Record};
pub use particles::{propagate_particles, run_particles, LawSource};
pub use picard::{flow_distance, picard_iterate, picard_solve, PicardOptions, PicardResult};
