//! Optimal control of a geometric phase gate between two transmons coupled
//! through a shared cavity: propagation, functionals, Krotov's method,
//! Nelder-Mead over analytic pulses, and the hybrid of the two.

pub mod chebyshev;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod gate_analysis;
pub mod history;
pub mod krotov;
pub mod linalg;
pub mod orchestrator;
pub mod parallel;
pub mod propagator;
pub mod pulse;
pub mod simplex;
pub mod system;

pub use error::{Error, Result};
