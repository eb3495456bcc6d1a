//! Butterfly-arbitrage analysis and arbitrage-free calibration of SVI
//! implied total variance smiles.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod black_scholes;
pub mod calibration;
pub mod domain;
pub mod error;
pub mod fukasawa;
pub mod market_data;
pub mod numerics;
pub mod svi;

pub use error::{Error, Result};
