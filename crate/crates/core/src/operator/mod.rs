//! Jump kernels, test functions, and singular-integral evaluation of the
//! generators, together with the numerical checks built on them.

pub mod checks;
pub mod function;
pub mod functionals;
pub mod generator;
pub mod kernel;
pub mod potential;

pub use function::{
    BallIndicator, Bump, ClosureFunction, Combination, Constant, Cosine, Gaussian, HalfBallIndicator, Integrand,
    OscillatingBump, SharedTest, Shifted, Tail, TestFunction,
};
pub use functionals::{lp_norm, riesz_potential, tail_functional, FunctionalOptions};
pub use generator::{
    apply_l, apply_l0, apply_lk, perturbation_part, truncation_part, GeneratorOptions, Operator, Weight,
};
pub use kernel::{validate_assumptions, AssumptionReport, JumpKernel};
pub use checks::{
    double_integral_check, perturbation_gap_check, poisson_residual, potential_bound_check, truncation_gap_bound,
    verify_poisson, LineGrid, PotentialSetup,
};
pub use potential::{PotentialFunction, PotentialOptions};
