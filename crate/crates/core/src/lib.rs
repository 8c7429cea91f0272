//! Closed-loop identification of nonlinear, possibly unstable systems through
//! the internal-controller parameterization: every plant stabilized by a known
//! controller `K` is the interconnection of `K` with a stable, strictly
//! causal operator `Q̂`, and `Q̂` is trained from closed-loop data.

pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod ici;
pub mod linalg;
pub mod plants;
pub mod seqops;
pub mod stable_family;
pub mod training;
pub mod verify;

pub use error::{IciError, Result};
