//! Tanh networks with explicitly constructed weights, numerical reference
//! solvers, and a convergence-study harness.

pub mod emulators;
pub mod finite_diff;
pub mod harness;
pub mod linalg;
pub mod mlp;
pub mod net;
pub mod operator;
pub mod residual;
pub mod rng;
pub mod spacetime;
pub mod spectral;
