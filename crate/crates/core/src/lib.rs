//! Numerical contraction analysis and composite control of two-time-scale
//! systems.

pub mod composite;
pub mod contraction;
pub mod error;
pub mod highgain;
pub mod model;
pub mod nonstandard;
pub mod numerics;
pub mod par;
pub mod sysdsl;

pub use error::{Error, Result};
