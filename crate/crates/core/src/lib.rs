//! Passivity-based certification of gradient descent step sizes, with
//! simulation of the underlying feedback interconnections.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod functions;
pub mod interconnect;
pub mod lti;
pub mod numfmt;
pub mod optim;
pub mod passivity;
pub mod signals;

pub use error::{Error, Result};
