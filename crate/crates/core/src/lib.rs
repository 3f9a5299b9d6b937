// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariance;
pub mod error;
pub mod expansion;
pub mod green;
pub mod grid;
pub mod lattice;
pub mod mc;
pub mod precision;
pub mod quadrature;
pub mod stats;
pub mod whitenoise;
