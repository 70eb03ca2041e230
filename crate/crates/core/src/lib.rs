//! Long-term fair decision policies for populations whose features evolve as
//! a finite-state Markov chain under the decisions taken.
//!
//! The chain, model, metric and simulation layers are generic over the
//! [`Scalar`] type; optimization, baselines and estimation run in `f64`. The
//! aliases below fix the scalar for the common cases.

// `!(a > b)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix notation.
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod markov;
pub mod metrics;
pub mod model;
pub mod optimize;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use markov::{total_variation, validate_kernel, Distribution, StateSpace, TransitionKernel};
pub use metrics::{cumulative_series, MetricContext, MetricSnapshot};
pub use model::{
    Dynamics, DynamicsPreset, GenerativeModel, Group, GroupDistributions, GroupPrior,
    LabelDistribution, Policy, Variant,
};
pub use optimize::{
    evaluate, preset_maxqual, preset_utilmax_eop, solve, Constraint, ConstraintKind, Evaluation, Objective,
    OptimizationSpec, SolveReport, SolverConfig,
};
pub use scalar::Scalar;
pub use simulate::{
    detect_convergence, evolve_distributions, multi_start_convergence, random_initial_distributions, simulate,
    MultiStartReport, Trajectory,
};

pub type DistributionF64 = Distribution<f64>;
pub type DistributionF32 = Distribution<f32>;
pub type KernelF64 = TransitionKernel<f64>;
pub type KernelF32 = TransitionKernel<f32>;
pub type PolicyF64 = Policy<f64>;
pub type PolicyF32 = Policy<f32>;
pub type ModelF64 = GenerativeModel<f64>;
pub type ModelF32 = GenerativeModel<f32>;
