//! Simulation and optimization toolkit for movable-antenna (MA) wireless systems.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: positions, path angles, wave vectors, moving regions and mover profiles.
//! * [`field_channel`]: the field-response channel model, `h(t, r) = f(r)ᴴ Σ g(t)`.
//! * [`spatial_corr`]: Jakes spatial correlation across discrete ports and eigen-truncated sampling.
//! * [`chanest`]: compressed-sensing channel acquisition (joint OMP and successive Tx/Rx recovery).
//! * [`placement`]: antenna position optimizers for communication objectives.
//! * [`sensing`]: steering/sensitivity vectors, beam patterns, Cramér–Rao bounds and virtual arrays.
//! * [`bench`]: scenario files and deterministic parameter sweeps behind the `ma-toolkit` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod chanest;
mod error;
pub mod field_channel;
pub mod geometry;
mod linalg;
pub mod placement;
pub mod sensing;
pub mod spatial_corr;
pub mod special;

pub use error::{Error, ErrorKind, Result};
pub use num_complex::Complex64;

/// Toolkit version string, embedded in sweep provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
