//! Numerical laboratory for small-noise asymptotics of a complex squared
//! Bessel diffusion started at the origin.
//!
//! The crate provides six layers, each usable on its own:
//!
//! - [`sde`]: Euler-Maruyama simulation of the complex SDE, its tilted
//!   variant, and the real and unscaled-parameter relatives, on shared
//!   deterministic [`grid::TimeGrid`]s with reproducible
//!   [`noise`] streams.
//! - [`ode`]: the deterministic controlled limit ODE, with a series
//!   startup at the degenerate origin and a refinement guard.
//! - [`rate`]: the energy functional `I` on paths, with explicit
//!   admissibility checks and control recovery.
//! - [`dual`]: the variational dual `J` over test fields and its
//!   finite-dimensional concave maximization.
//! - [`geodesic`]: minimal-energy controls steering the ODE to a point,
//!   against the closed-form endpoint rate.
//! - [`mc`]: Monte Carlo estimates of rare-event probabilities with exact
//!   discrete Girsanov tilting, slope extraction, convergence, pathwise
//!   bounds, supermartingale and tail probes.
//!
//! All randomized routines are pure functions of `(seed, grid,
//! parameters)`: counter-based per-path streams and pairwise reductions
//! make results independent of the number of threads.

pub mod control;
pub mod dual;
pub mod error;
pub mod geodesic;
pub mod grid;
pub mod mc;
pub mod noise;
pub mod ode;
pub mod path;
pub mod rate;
pub mod sde;
pub mod stats;

pub use control::Control;
pub use error::{Error, Result};
pub use grid::{delta_grid, TimeGrid};
pub use noise::{sample_noise, NoisePath, SimParams};
pub use path::ComplexPath;
pub use sde::RealPath;

pub use num_complex::Complex64;
