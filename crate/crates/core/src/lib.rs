#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod error;
pub mod ode;
pub mod params;
pub mod phase;
pub mod quadrature;
pub mod radial;
pub mod singular;

pub use error::{Error, Result};
