//! Large-deviation analysis of a ring of servers where each Poisson flow
//! joins the less loaded of its two neighbouring servers.
//!
//! The crate covers the pieces needed to study overload in this network:
//! message-length models and their moment generating functions, the rates of
//! the overheating scenarios and the arrival rates where the dominant scenario
//! changes, the linear program that balances server loads under a given input
//! configuration, and a discrete-event simulator with importance sampling.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod critical;
pub mod distributions;
pub mod error;
pub mod rates;
mod roots;
pub mod routing;
pub mod sim;
pub mod tables;

pub use distributions::MessageLengthModel;
pub use error::{Error, Result};
pub use rates::NetworkParams;
