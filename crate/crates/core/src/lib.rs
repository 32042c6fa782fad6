//! Non-Markovian dissipative QMUPL dynamics for Gaussian states.
//!
//! The propagator of a free particle driven by exponentially correlated
//! noise is assembled from three boundary-value problems (f, g, h). Two
//! solvers are provided, an analytic one for the exponential kernel and a
//! dense grid discretization for any kernel, plus a brute-force discretized
//! path integral used as an independent check.

pub mod closed_form;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod grid_bvp;
pub mod hp;
pub mod kernel;
pub mod params;
pub mod path_integral;
pub mod propagator;
pub mod quad;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use kernel::{sample_exponential_path, sample_noise, CorrelationKernel, DriftKernelB, LagTable, NoisePath, NoiseSampler};
pub use params::{Complex, ModelParams, HBAR, K_B};
