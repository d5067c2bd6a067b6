//! Energy-aware scheduling under deadline and reliability constraints.
//!
//! Tasks either run once at a speed no lower than `frel`, or twice (back to
//! back on one processor, or side by side on two) at lower speeds whose
//! combined failure probability stays below the single-run bound.

pub mod chain;
pub mod cli;
pub mod error;
pub mod fptas;
pub mod gen;
pub mod indep;
pub mod model;
pub mod oracle;
pub mod validate;

pub use error::{Error, Result};
