//! Dynamic asymmetric and symmetric exclusion processes with their
//! q-Racah/q-Krawtchouk duality functions.

// `!(x > 0.0)` also rejects NaN; kernel signatures mirror the parameter lists.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments,
    clippy::type_complexity,
    clippy::should_implement_trait
)]

pub mod cli;
pub mod dualities;
pub mod error;
pub mod lattice;
pub mod precise;
pub mod processes;
pub mod qspecial;
pub mod simulate;
pub mod suite;
pub mod uqsl2;

pub use error::{Error, Result};
