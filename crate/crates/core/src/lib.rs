//! Kernel matching estimation of average treatment effects on estimated
//! propensity scores, with competitor estimators, bootstrap intervals, data
//! generating processes, and a Monte Carlo harness.
//!
//! The core is generic over the scalar type through [`Real`]; the aliases
//! below fix `f64`, which every shipped workflow uses.

pub mod dataio;
pub mod dgp;
pub mod estimators;
pub mod kernels;
pub mod mcharness;
pub mod num;
pub mod numeric;
pub mod propensity;
pub mod report;
pub mod resampling;
pub mod seeding;

pub use num::Real;

/// Double-precision observational sample.
pub type Sample = estimators::ObservationalSample<f64>;
/// Double-precision effect estimate.
pub type Estimate = estimators::EffectEstimate<f64>;
/// Double-precision kernel configuration.
pub type Kernel = kernels::KernelSpec<f64>;
/// Double-precision bootstrap output.
pub type Bootstrap = resampling::BootstrapResult<f64>;
