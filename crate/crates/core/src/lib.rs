//! Bayesian density estimation on `(0, ∞)` with Dirichlet-process mixtures of
//! Gamma kernels, plus a numerical workbench for the kernel identities and
//! approximation constructions behind the model.

pub mod approx;
pub mod density;
pub mod dpm;
pub mod error;
pub mod jet;
pub mod kernels;
pub mod metrics;
pub mod quadrature;
pub mod special;
pub mod zoo;

pub use density::{Density, FnDensity};
pub use error::{Error, Result};
pub use kernels::KernelParams;
pub use zoo::{make_density, sample_dataset, SmoothDensity};
