//! Quadrature, optimization, finite differences and seeded randomness.

mod diff;
mod optimize;
mod quadrature;
mod rng;

pub use diff::finite_diff_grad;
pub use optimize::{minimize, Bound, Minimum, OptimizerConfig};
pub use quadrature::{integrate, Integrator, QuadratureRule};
pub use rng::{RngSeed, Stream};
