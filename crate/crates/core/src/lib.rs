//! Explicit quantitative constants for nonexpansive maps in uniformly convex
//! spaces.
//!
//! * [`magnitude`]: positive reals with stacked exponents, used for rates far
//!   beyond the `f64` range.
//! * [`moduli`]: moduli of uniform convexity and the derived functions that
//!   enter the rate of asymptotic regularity.
//! * [`pisier`]: Rademacher type `q` and constant `C_q` from a nonsquareness
//!   witness.
//! * [`rates`]: the rate `N(eps)` for Cesaro means, in leveled arithmetic.
//! * [`spaces`]: finite-dimensional `l^p` spaces, a catalogue of nonexpansive
//!   maps and a streaming Cesaro-mean iterator.
//! * [`verify`]: exhaustive and seeded sampled checks of every inequality the
//!   constants rely on.
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]
// range checks are written to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// fallible arithmetic on magnitudes keeps the operator names
#![allow(clippy::should_implement_trait)]

extern crate alloc;

pub mod magnitude;
pub mod moduli;
pub mod pisier;
pub mod rates;
pub mod spaces;
pub mod verify;

pub use magnitude::{LeveledMagnitude, SignedMagnitude};
