//! Dynamical systems methods for ill-posed equations `F(u) = f` with a
//! monotone nonlinear operator and noisy data `f_δ`.
//!
//! The crate is layered bottom-up: [`hilbert`] discretizes L²[0,1],
//! [`operator`] holds monotone operators and their derivative bounds,
//! [`regularized`] solves `F(V) + aV = f_δ` directly, [`schedule`] builds
//! and validates regularization schedules, [`solver`] runs the gradient
//! iteration, its continuous flow and the Newton baseline, and [`harness`]
//! wires everything into reproducible experiments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod hilbert;
pub mod operator;
pub mod quadrature;
pub mod regularized;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};
