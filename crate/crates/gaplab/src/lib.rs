//! Metric-TSP integrality-gap laboratory.
//!
//! The crate runs the max-entropy rounding pipeline end to end (subtour LP,
//! λ-uniform spanning trees, odd-vertex matching) and materializes the
//! near-minimum-cut structure the analysis of that pipeline relies on:
//! crossing components, atoms, polygon arrangements, bad events and the
//! slack vector `s*`. Every structural inequality that can be checked at desk
//! scale is exposed as a verifier so that experiments can audit it.

pub mod atlas;
pub mod bits;
pub mod check;
pub mod error;
pub mod harness;
pub mod instance;
pub mod lp;
pub mod maxent;
pub mod num;
pub mod ojoin;
pub mod slack;

pub use error::{Error, Result};
pub use num::Q;
