//! Numerical toolkit for discrete-time fractional-order linear time-invariant
//! (FOLTI) systems.
//!
//! The crate covers the whole theoretical pipeline:
//!
//! - [`gl`]: Grünwald–Letnikov coefficients and the fractional difference operator.
//! - [`dynamics`]: recursive simulation and the closed-form propagator solution.
//! - [`lqr`]: finite-horizon LQR via stacked least squares and via the
//!   Lagrange-multiplier block-Toeplitz system, plus a Riccati oracle.
//! - [`toeplitz`]: block-Toeplitz operators with dense and GMRES solvers.
//! - [`sysid`]: one-step least-squares identification of `A + diag(α)` and `B`.
//! - [`complexity`]: sample-complexity bounds and the Monte-Carlo gap experiment.
//! - [`forge`]: seeded synthetic models, costs, noise and datasets.
//! - [`io`]: the JSON/CSV interchange format.
//! - [`baseline`]: the integer-order LTI identification baseline.

pub mod baseline;
pub mod complexity;
pub mod dynamics;
pub mod error;
pub mod forge;
pub mod gl;
pub mod io;
pub mod linalg;
pub mod lqr;
pub mod rng;
pub mod sysid;
pub mod toeplitz;

pub use dynamics::{Convention, FoltiModel, PropagatorSet, Trajectory};
pub use error::{FoctlError, Result};
pub use gl::{FracOrder, GlCoeffTable};
pub use lqr::{ControlSolution, CostSpec, Method};
pub use toeplitz::{BlockToeplitz, SolveMethod};

/// Toolkit version recorded in every provenance block.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
