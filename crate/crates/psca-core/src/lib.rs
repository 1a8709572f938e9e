//! Parallel successive convex approximation (PSCA) for composite
//! optimization min_x f(x) + Σ_i g_i(x_i) over block-separable convex sets.
//!
//! At each iteration a subset of blocks is selected (cyclically over a
//! fixed partition, or by independent randomized inclusion), each selected
//! block's convex surrogate subproblem is minimized against a shared
//! read-only snapshot of the iterate, and the iterate moves by a convex
//! combination x_i ← x_i + γ^r(x̂_i − x_i). The crate also carries exact
//! serial coordinate-descent baselines, a KKT-certified Lasso instance
//! generator, and diagnostics that audit the method's convergence theory
//! (sufficient decrease, best-response Lipschitz continuity, proximal
//! gradient optimality, complexity constants, 1/r rate fits) on observed
//! runs.

pub mod diagnostics;
pub mod error;
pub mod lasso;
pub mod layout;
pub mod linalg;
pub mod oracles;
pub mod problem;
pub mod rng;
pub mod schedule;
pub mod solver;
pub mod step;
pub mod surrogate;

pub use error::{CoreError, Result};
pub use lasso::{generate_nesterov, soft_threshold, LassoInstance};
pub use layout::BlockLayout;
pub use linalg::DesignMatrix;
pub use problem::{Iterate, Nonsmooth, Problem, Smooth};
pub use schedule::{CyclicSchedule, RandomizedSchedule, Schedule};
pub use solver::{
    psca_run, psca_step, serial_bcd_run, BcdConfig, BcdRule, CertifiedOptimum, IterationRecord,
    SolverConfig, SolverTrace, Termination,
};
pub use step::{gamma_bar, StepSchedule};
pub use surrogate::{
    best_response, certify_constants, surrogate_gradient, surrogate_value,
    verify_gradient_consistency, SurrogateFamily, SurrogateSpec,
};
