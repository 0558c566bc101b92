//! Freezing of Gibbs measures for shift potentials that vanish on `N`
//! sub-shifts.
//!
//! The crate computes the pressure `P(β)`, the eigenfunction and
//! eigenmeasure on blocks and rings, the Gibbs weights, the max-plus
//! eigenvalue `γ` with its calibrated subaction, the zone of a parameter
//! set, and the predicted zero-temperature limit. The [`oracle`] module
//! solves a finite truncated chain independently of the series machinery.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![forbid(unsafe_code)]
// Negated float comparisons are deliberate: NaN must take the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense elimination and DP tables read better with explicit indices.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod math;
pub mod measures;
pub mod model;
pub mod oracle;
pub mod pressure;
pub mod series;
pub mod tropical;

pub use model::{Letter, ModelParams, ParamSet, PointRep, RunLength, Tail, ValidationError};
