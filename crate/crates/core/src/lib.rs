//! Numerical construction and verification of foliations of the cones
//! `C_kl = {|x| = |y|}` over `S^k x S^l` by critical points of anisotropic
//! one-homogeneous integrands.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod exec;
pub mod foliation;
pub mod integrand;
pub mod numerics;
pub mod ode;

pub use error::{Error, Result};
pub use exec::Execution;
