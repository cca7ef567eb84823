//! Numerical toolkit for Loewner evolutions driven by complex-valued functions.
//!
//! * [`driver`]: driving functions and their symmetry transforms.
//! * [`engine`]: forward/backward flows, swallow times, inverse maps.
//! * [`hull`]: hull rasters, right hulls by duality, frontier traces.
//! * [`linear`]: the linear driver `c t`, pioneer-curve continuation and phase classification.
//! * [`verify`]: executable symmetry and counterexample checks.
//! * [`io`]: CSV, PGM and SVG export.

pub mod driver;
pub mod engine;
pub mod exec;
pub mod geometry;
pub mod hull;
pub mod linear;
pub mod verify;
pub mod io;
mod rk;

pub use driver::{Driver, DriverError, Transform};
pub use engine::{EngineError, SolverOptions};
pub use exec::Exec;
pub use num_complex::Complex64;
