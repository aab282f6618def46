//! Numerical laboratory for the spectra of weighted, weakly singular
//! integral operators on singular measures.
//!
//! The pipeline discretizes an operator
//! `u -> integral of F1(X) K(X, Y, X - Y) F2(Y) u(Y) d mu(Y)` over a
//! weighted atom cloud (circle, Lipschitz graph, Cantor-type cloud, or a
//! Lebesgue cube baseline), computes the full spectrum, fits the power-law
//! decay of the counting function, and compares the fitted exponent and
//! coefficient against closed-form predictions.

// `!(x > 0.0)` is used on purpose in input validation: unlike `x <= 0.0` it
// also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod measures;
pub mod powerfit;
pub mod quad;
pub mod runner;
pub mod spectra;
pub mod weyl;

pub use assembly::{assemble, DiagonalRule, OperatorMatrix, WeightField};
pub use error::{Error, Result};
pub use kernels::{
    apply_multiplier, log_kernel, riesz_kernel, Amplitude, KernelSpec, KernelTerm, MultiplierSpec,
    RightMultiplier,
};
pub use measures::{
    measure_class_report, ClassVerdict, GridSpec, MeasureClassReport, MeasureKind, PhiTable,
    SingularMeasure,
};
pub use powerfit::{extrapolate, fit_power_law, ExtrapolatedFit, PowerFitResult};
pub use runner::{run_experiment, verify_report, ExperimentConfig, ExperimentReport};
pub use spectra::{counting, hermitian_eigen, kyfan_verify, singular_values, Sign, Spectrum};
pub use weyl::{
    circle_oracle, exponent_table, fiber_symbol_constant, luxemburg_norm, plan_factorization,
    riesz_symbol_constant, sigma_weyl, weight_norm_factor, weyl_coefficient, CircleOracle,
    Normalization, WeylPrediction,
};
