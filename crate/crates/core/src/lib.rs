//! Tabular robust MDPs with L_p-ball uncertainty on the transition kernel.
//!
//! The nominal model is a [`TabularMdp`]; an [`UncertaintySpec`] attaches a
//! simplex-valid L_p ball to every state-action pair (sa-rectangular) or to
//! every state (s-rectangular). The inner adversarial minimum is evaluated by
//! [`dual::kappa_sa`] / [`dual::kappa_s`], and [`bellman::drvi_sa`] /
//! [`bellman::drvi_s`] run robust value iteration on top of it.
//! [`generative`] builds empirical models from a sampler and [`oracle`]
//! holds brute-force reference solvers for small instances.

pub mod bellman;
pub mod dual;
pub mod error;
pub mod generative;
pub mod io;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod search;
pub mod span;

pub use bellman::{SolveResult, ThresholdSolve};
pub use dual::KappaResult;
pub use error::{Result, RmdpError};
pub use model::{
    random_mdp, validate_mdp, EmpiricalModel, Exponent, Policy, QFunction, RawMdp,
    Rectangularity, TabularMdp, UncertaintySpec,
};
pub use scalar::Scalar;
pub use span::SpanResult;

/// Double-precision model.
pub type Mdp = TabularMdp<f64>;
/// Double-precision uncertainty specification.
pub type Uncertainty = UncertaintySpec<f64>;
/// Double-precision policy.
pub type StochasticPolicy = Policy<f64>;
/// Double-precision solver output.
pub type Solution = SolveResult<f64>;
/// Double-precision empirical model.
pub type Empirical = EmpiricalModel<f64>;
