//! Online learning of nearest-neighbor partitions with distance-weighted loss.
//!
//! The stack is layered bottom-up: [`numerics`] (LP, convex bodies, sampling),
//! [`knowledge`] (knowledge sets and the scale schedule), [`csearch`]
//! (contextual search), [`pairwise`] (two-center sign learner),
//! [`multiclass`] (k-center reduction), [`kernels`] (coordinate lifts for L^p
//! similarity), [`multiscale`] (general-p two-center learner) and [`arena`]
//! (environments, adversaries, ledgers and episodes).

pub mod arena;
pub mod csearch;
pub mod error;
pub mod kernels;
pub mod knowledge;
pub mod multiclass;
pub mod multiscale;
pub mod numerics;
pub mod pairwise;

pub use error::{Error, Result};
