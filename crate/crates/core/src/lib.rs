//! Liveness-driven state-space reductions for probabilistic control-flow
//! programs, with an exact explicit-state Markov-chain oracle.
//!
//! The pipeline is: [`frontend::parse`] a model, compute command-level
//! liveness with [`liveness::lra`], then apply [`reduce::rvo`] (reset dead
//! variables) and/or [`reduce::rao`] (merge non-interfering variables).
//! [`dtmc`] builds the Markov chain of any program and checks that
//! round-bounded reachability is preserved exactly.
//!
//! Chains are generic over a [`Scalar`] transition weight; the aliases
//! below fix the common choices.

pub mod dtmc;
pub mod frontend;
pub mod harness;
pub mod interference;
pub mod ir;
pub mod linalg;
pub mod liveness;
pub mod models;
pub mod reduce;
pub mod scalar;

use thiserror::Error;

pub use scalar::Scalar;

/// Exact probability type used for all verdicts.
pub type Probability = num_rational::BigRational;

/// Markov chain with exact rational transition probabilities.
pub type ExactDtmc = dtmc::Dtmc<Probability>;

/// Markov chain with double-precision transition probabilities.
pub type FloatDtmc = dtmc::Dtmc<f64>;

/// Single-precision variant, mostly useful for memory-bound inspection.
pub type F32Dtmc = dtmc::Dtmc<f32>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] frontend::ParseError),
    #[error(transparent)]
    Eval(#[from] ir::EvalError),
    #[error(transparent)]
    Rename(#[from] ir::RenameError),
    #[error(transparent)]
    Reduce(#[from] reduce::ReduceError),
    #[error(transparent)]
    Dtmc(#[from] dtmc::DtmcError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
