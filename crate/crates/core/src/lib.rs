//! Deception planning in one-sided partially observable stochastic games.
//!
//! A deceiver with full observability plays against an infiltrator that only
//! sees observations. The crate evaluates strategy pairs, reduces the
//! infiltrator's problem to a parametric MDP, synthesizes a diverse set of
//! strong infiltrator strategies, and computes a deceiver strategy that is
//! robust against all of them.

pub mod error;
pub mod game;
pub mod harness;
pub mod netsec;
pub mod pmdp;
pub mod robust;
pub mod samples;
pub mod synthesis;

pub use error::{Error, Result};
