//! Skew products over `t ↦ k t mod 1` with weakly contractive planar fiber
//! maps: attractors, invariant graphs, stationary measures, Lyapunov
//! exponents and numerical certificates for each of them.

pub mod attractor;
pub mod ergodics;
pub mod error;
pub mod family;
pub mod geometry;
pub mod graph;
pub mod par;
pub mod perturbation;
pub mod rng;
pub mod skew;

pub use error::{Error, Result};
