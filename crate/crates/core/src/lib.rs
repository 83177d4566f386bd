// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod integrator;
pub mod nonlinearity;
pub mod verifier;
