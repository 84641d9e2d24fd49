//! The rotationally symmetric α-stable process: samplers, transition
//! density, resolvent kernel and its envelope check.

pub mod bounds;
pub mod checks;
pub mod density;
pub mod params;
pub mod resolvent;
pub mod sampler;

pub use bounds::check_resolvent_bounds;
pub use checks::{density_by_inversion, density_resolvent_check, sampler_law_check};
pub use density::{transition_density, StandardDensity};
pub use params::{symbol_constant, StableParams};
pub use resolvent::{RadialJet, RadiusGrid, Resolvent, ResolventTable};
pub use sampler::{sample_stable_increment, sample_subordinator_increment, stable_increment_vec};
