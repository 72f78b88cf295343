//! Conformal invariants of submanifolds in pseudo-Riemannian conformal space.

pub mod calculus;
pub mod cli;
pub mod error;
pub mod indefinite;
pub mod jet;

pub use error::{Error, Result};
pub mod catalog;
pub mod conformal;
pub mod expr;
pub mod spaceform;
pub mod isometric;
pub mod isotropy;
pub mod willmore;
