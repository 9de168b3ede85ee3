//! Constitutive laws for viscoplastic fluids with a micro-rotation datum.
//!
//! The crate is `no_std` (with `alloc`) and covers the pointwise algebra:
//! stress tensors, convex potentials and their regularizations, plastic
//! operators, plug-point subdifferentials, and a 1D shear-channel solver.
//! File formats, the periodic spectral driver and the CLI live in the `ysl`
//! crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod constitutive;
pub mod error;
pub mod field;
pub mod implicit_law;
pub(crate) mod math;
pub mod params;
pub mod subdiff;
pub mod tensor;
pub mod tol;

pub use constitutive::{BuildingBlocks, StressResult};
pub use error::{Error, Result};
pub use field::FieldD;
pub use params::{FluidParams, MicroRotation};
pub use tensor::MatD;
