//! Periodic spectral driver, verification suites, file formats and the
//! `ysl` command-line front end built on `ysl-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod fft2;
pub mod galerkin;
pub mod output;
pub mod runs;
pub mod verify;
