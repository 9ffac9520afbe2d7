//! Gradient-free minimax optimization with recursive variance reduction.
//!
//! The crate implements ZO-VRGDA, a zeroth-order variance-reduced gradient
//! descent ascent solver for nonconvex-strongly-concave minimax problems,
//! together with its building blocks and points of comparison:
//!
//! - [`estimators`]: Gaussian-smoothing and coordinate-wise gradient
//!   estimators plus the recursive variance-reduced difference update, all
//!   with exact query accounting;
//! - [`isarah`]: ZO-iSARAH, a recursive variance-reduced solver for strongly
//!   convex minimization, used to initialize the inner variable and usable
//!   standalone;
//! - [`inner`]: the variance-reduced concave maximizer that advances the
//!   inner variable between outer steps;
//! - [`vrgda`]: the outer driver with epoch snapshots and both `theory` and
//!   `practical` parameter profiles;
//! - [`baselines`]: ZO-SGDA and ZO-SGDMSA reference implementations;
//! - [`dro`]: a distributionally robust logistic-regression benchmark on
//!   LIBSVM-format data, with exact simplex projection and an exact inner
//!   maximizer for loss reporting.
//!
//! Batch oracle evaluations run on rayon when the default `parallel`
//! feature is enabled; reductions always happen in index order, so results
//! are bit-identical with and without the feature.

pub mod baselines;
pub mod batch;
pub mod counter;
pub mod dro;
pub mod error;
pub mod estimators;
pub mod inner;
pub mod isarah;
pub mod linalg;
pub mod problems;
pub mod quadratic;
pub mod rng;
pub mod trace;
pub mod vrgda;

pub use counter::QueryCounter;
pub use error::{Error, Result};
pub use estimators::{GradEstimate, SmoothingConfig};
pub use problems::{MinimaxProblem, ProblemConstants, Regime, Sample, StochasticObjective};
pub use quadratic::{QuadraticObjective, QuadraticSaddle};
pub use trace::{RunHooks, RunTrace, TraceRow};
pub use vrgda::{vrgda_defaults, vrgda_run, Profile, VrgdaParams};
