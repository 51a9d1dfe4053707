//! Discrete heat kernels and resolvent Green functions of higher-order
//! elliptic operators on bounded domains, with the bound templates and the
//! interpolation bootstrap that relate them.
//!
//! The pipeline: build a [`DiscreteOperator`] on a [`Grid`], decompose it with
//! [`eigendecompose`], evaluate kernels with [`KernelEvaluator`], certify Green
//! lower bounds with [`TestFunctionFamily`], and turn them into kernel lower
//! bounds with [`bootstrap_lower_bound`].

// `!(x > 0.0)` is how argument checks reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod bounds;
pub mod domain;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod operator;
pub mod quadrature;
pub mod spectral;
pub mod stats;
pub mod test_functions;

pub use bootstrap::{
    bootstrap_from_green, bootstrap_lower_bound, gamma_term_estimate, green_heat_rhs,
    interpolation_check, p_of, solve_delta_star, BootstrapConfig, BootstrapOutcome,
    BootstrapStatus, GreenSource, TimeTemplate, UpperAt,
};
pub use bounds::{
    calibrate_constant, calibration_points, g_of_t, gamma_from_eps, BoundParams, CalibrationSample, Direction, Regime,
};
pub use domain::{Domain, Grid};
pub use error::{Error, Result};
pub use kernel::{green_resolvent, green_solve, green_variational, GreenRoute, KernelEvaluator};
pub use operator::{ellipticity_constants, Coefficient, DiscreteOperator, Ellipticity, OperatorSpec};
pub use spectral::{eigendecompose, eigendecompose_with, spectral_gap, ModeCount, SolverOptions, SpectralDecomposition};
pub use stats::{fit_power_law, PowerFit};
pub use test_functions::{bump, BumpProfile, CertifiedGreen, TestFnRegime, TestFunctionFamily};
