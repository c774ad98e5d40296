//! Weak optimal transport at desk scale.
//!
//! The central object is the problem `inf over couplings of
//! integral C(x, pi_x) d mu` where the cost `C` acts on the whole conditional
//! law `pi_x` instead of on points. Four cost families are built in
//! (classical, barycentric, entropic, monopoly-icx), each with a primal
//! Frank-Wolfe solver, dual certificates via the inf-convolution transform,
//! and constructive monotonicity checks. On top of these the crate implements
//! entropic bridges with product-form verification, convex and increasing
//! convex order deciders with witnesses, the quadratic projection onto a
//! convex-order lower set, and the four equivalent monopoly pricing programs.
//!
//! Start from [`wot::solve_primal`] / [`wot::solve_dual`], or run the
//! `wotlab` binary on a JSON problem file. The `examples/` directory has one
//! runnable walkthrough per capability.

#![forbid(unsafe_code)]

pub mod brenier_strassen;
pub mod cli;
pub mod costs;
pub mod engines;
pub mod error;
pub mod measures;
pub mod monopoly;
pub mod monotonicity;
pub mod orders;
pub mod schrodinger;
pub mod suite;
pub mod wot;

pub use error::{Error, Result};
