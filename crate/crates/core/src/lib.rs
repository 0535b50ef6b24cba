#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod guidance;
pub mod harness;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod mgd;
pub mod objectives;
pub mod oracle;
pub mod sampler;
pub mod schedule;

pub use error::{Error, Result};
