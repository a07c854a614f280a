//! Solver and estimate verifier for the retarded relativistic Vlasov–Maxwell
//! system in units c = 1 with unit mass and charge.
//!
//! The pipeline is: a compactly supported initial density, characteristics
//! under a field, retarded fields from the density, and the Picard sequence
//! f₁ → F₁ → f₂ → … with weighted-norm monitoring. The `lightcone` and
//! `diagnostics` modules check the decay and integral estimates numerically.

pub mod characteristics;
pub mod checks;
pub mod config;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod initial;
pub mod iterates;
pub mod kinematics;
pub mod lightcone;
pub mod picard;
pub mod quadrature;
pub mod retarded;
pub mod rundir;
pub mod settings;
pub mod sources;
pub mod table;

pub use density::{Domain, FieldFn, PhaseDensity, SupportBound, ZeroField};
pub use error::{Error, Result};
pub use initial::{InitialData, Profile};
pub use kinematics::{a_of_beta, p_hat, FieldValue, PhasePoint, Vec3};
pub use settings::{GridSpec, IterationSpec, MomentumRule, QuadratureSpec};
