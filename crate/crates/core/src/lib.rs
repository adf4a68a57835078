//! Secure-key rate engine for decoy-state BB84 with one-way and two-way
//! classical post-processing.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It covers:
//!
//! * the fiber channel model ([`channel`]),
//! * Bell-diagonal distillation algebra: hashing rate, B and P steps ([`edp`]),
//! * the tolerable error-rate region under B/P sequences ([`boundary`]),
//! * tagged/untagged residues, decoy estimation and the intensity and
//!   distance optimizers ([`decoy`]),
//! * the B-step scheme ([`bstep`]) and the recurrence scheme ([`recurrence`]),
//! * finite-size fluctuation analysis ([`fluctuations`]),
//! * closed-form distance and rate ceilings ([`bounds`]),
//! * an enumeration and Monte Carlo cross-check of the transforms ([`oracle`]).
//!
//! The companion `twoway` crate provides configuration files, CSV output and
//! the command-line interface.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod boundary;
pub mod bounds;
pub mod bstep;
pub mod channel;
pub mod decoy;
pub mod edp;
mod error;
pub mod fluctuations;
pub mod math;
pub mod oracle;
pub mod recurrence;

pub use error::{Error, Result};
