//! Forward and inverse solvers for the double phase equation
//! `Div(|grad u|^(p-2) grad u + a |grad u|^(q-2) grad u) = 0` on rectangles.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod coefficient;
pub mod dn_map;
pub mod error;
pub mod forward;
pub mod linear_elliptic;
pub mod mesh;
mod par;
pub mod reconstruct;
pub mod sparse;
pub mod tensorops;

pub use error::{Error, Result};
