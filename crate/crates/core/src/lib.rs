//! Numerical laboratory for subordinate killed Brownian motion `Y^D_t = W^D_{S_t}`.
//!
//! Brownian motion here has generator `Δ`, so the free kernel is
//! `(4πt)^{-d/2} exp(-|x-y|²/4t)` and each coordinate has variance `2t`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod bernstein;
pub mod domain;
pub mod error;
pub mod heat;
pub mod kernels;
pub mod mc;
pub mod quad;
pub mod report;
pub mod special;

pub use error::{Error, Result};
