//! Censored block model observed through a binary erasure channel.
//!
//! The erasure channel makes the posterior exactly combinatorial: every
//! revealed measurement is a parity constraint, the partition function is a
//! power of two and every Gibbs bracket is either 0 or 1. This crate exploits
//! that to compute free entropies exactly through GF(2) rank, and builds on it
//! the replica-symmetric prediction, density evolution, and a numerical
//! realization of the adaptive path interpolation (interpolating ensemble,
//! moment-matched path, sum rule and concentration checks).
//!
//! Module map:
//! - [`channel`]: erasure channel, two-point message family, BP update.
//! - [`gf2`]: bit-packed GF(2) row-reduction.
//! - [`model`]: instance generation and exact posterior quantities.
//! - [`oracle`]: brute-force enumeration used as ground truth.
//! - [`replica`]: replica-symmetric free entropy, density evolution, phase scan.
//! - [`interpolation`]: the `(t, s)` interpolating ensemble and its checks.
//! - [`cli`]: reproducible experiment commands behind the `cbm` binary.

pub mod channel;
pub mod cli;
pub mod error;
pub mod gf2;
pub mod interpolation;
pub mod model;
pub mod oracle;
pub mod replica;
pub mod rng;
pub mod stats;

pub use channel::{BecChannel, Coupling, PointMassMix};
pub use error::{Error, Result};
pub use gf2::Gf2System;
pub use model::{Instance, ModelParams};
