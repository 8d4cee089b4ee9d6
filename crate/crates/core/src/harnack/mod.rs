//! Coupling by change of measure under a regularised subordinator path,
//! and Monte Carlo checks of the log-, power- and entropy-cost Harnack
//! inequalities.

mod constants;
mod coupling;
mod inequalities;

pub use constants::{k1, k_const, stieltjes_k1, xi, KVariant, Profile, XiScaling, PANELS};
pub use coupling::*;
pub use inequalities::*;
