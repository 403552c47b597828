//! Projection estimators onto the Dantzig constraint region
//! `DC(s) = { beta : ||X'(Y - X beta)||_inf <= s }`.
//!
//! The crate provides
//! - design normalization, spectral pseudo-inverses and the validated `(A, P, Omega)` triple ([`linalg`]),
//! - the constraint region itself and the calibration of `s` ([`region`]),
//! - the generalized Dantzig selector, the generalized LASSO (with its l1 tie-break),
//!   the equivalent penalized program and seminorm projections ([`estimators`]),
//! - a sampler for the restricted eigenvalue constant of the cone condition ([`assumptions`]),
//! - a seeded Monte Carlo harness that checks coverage and the four oracle inequalities ([`simulation`]),
//! - CSV and configuration parsing ([`io`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assumptions;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod region;
pub mod simulation;

pub use error::{Error, Result};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
