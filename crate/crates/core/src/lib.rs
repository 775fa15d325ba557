//! Numerical core for matrix-weighted norm inequalities: Young functions
//! and Luxemburg norms, dyadic grids, matrix weight fields, reducing
//! operators, weight constants, the associated operators, and a
//! verification harness.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod linalg;
pub mod young;
pub mod dyadic;
pub mod weights;
pub mod reducing;
pub mod constants;
pub mod operators;
pub mod verify;

pub use error::{Error, Result};
