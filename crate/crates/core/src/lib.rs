//! Two-bank structural default model with mutual interbank obligations.
//!
//! Asset values follow correlated geometric Brownian motions; a bank defaults when its
//! assets cross a liability-derived boundary, and the boundary of the survivor moves when
//! its counterparty fails. In log coordinates survival and contract values are integrals
//! of the transition density of a drifted Brownian motion killed on the edges of a wedge.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod calibrate;
pub mod clearing;
pub mod cli;
pub mod error;
pub mod greens;
mod integrals;
pub mod model;
pub mod network;
pub mod pde;
pub mod pricing;
pub mod quad;
pub mod specfun;
pub mod survival;

pub use error::{Error, Result};
