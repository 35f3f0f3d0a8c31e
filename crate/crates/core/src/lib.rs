//! Energy management for series hybrid electric vehicles with an engine
//! start-stop system: powertrain model, closed-form minimum-principle power
//! split, dynamic-programming benchmark, rule-based controllers with a
//! charge-sustaining tuner, and equivalent-fuel accounting.

// `!(x > 0.0)` style checks are deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic_pmp;
pub mod cycles;
pub mod dp;
pub mod efc;
pub mod error;
mod interp;
pub mod io;
pub mod powertrain;
pub mod rulebased;
pub mod trajectory;
pub mod tuner;

pub use error::{Error, Result};
