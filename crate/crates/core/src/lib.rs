//! Contradistinguisher (CTDR) for unsupervised domain adaptation.
//!
//! One encoder + classifier network is trained jointly with a supervised
//! cross-entropy loss on labeled source data and the prior-enforcing
//! contradistinguish loss on unlabeled target data, optionally regularized by
//! pushing fake samples toward a uniform multi-label assignment.
//!
//! This crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! anything touching the filesystem live in the `ctdr` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;

pub mod data;
pub mod eval;
pub mod fake;
pub mod losses;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
pub use numerics::{Matrix, Rng};
