//! Slepian-sequence excitation of separable Volterra systems.
//!
//! The crate generates discrete prolate spheroidal sequences, simulates
//! multi-input multi-output Volterra systems driven by them, evaluates the
//! higher-order suppression bounds, and runs the inner-product detector
//! against a least-squares kernel-identification baseline.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod detector;
pub mod error;
pub mod fourier;
pub mod harness;
pub mod identify;
pub mod io;
pub mod laguerre;
pub mod linalg;
pub mod quadrature;
pub mod seeds;
pub mod signals;
pub mod slepian;
pub mod volterra;

pub use error::{Error, Result};
