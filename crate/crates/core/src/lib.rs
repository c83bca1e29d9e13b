//! Concentration bounds on operator growth in random local Hamiltonians.
//!
//! The crate has two halves. The numerical half samples random Hamiltonians,
//! evolves local operators exactly and measures commutator observables. The
//! analytic half enumerates self-avoiding interaction paths and evaluates
//! moment bounds, tail bounds, light-cone velocities and scrambling ratios.
//! [`martingale`] checks the matrix inequalities the bounds rest on.

// `!(x > 0.0)` is the NaN-rejecting guard used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod martingale;
pub mod paths;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
