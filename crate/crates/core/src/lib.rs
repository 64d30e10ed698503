//! Grid Hartree-Fock fields, free-space FFT convolution, Poisson-kernel
//! harmonic extensions and convolution-transformed residuals.

pub mod cli;
pub mod conv;
pub mod error;
pub mod extension;
mod fft;
pub mod hf;
pub mod grid;
pub mod kernels;
pub mod scf;
mod par;
mod quadrature;
pub mod transform;

pub use conv::ConvolutionPlan;
pub use error::{Error, Result};
pub use grid::{EvalWindow, GridSpec, LaplacianMethod, NormKind, ScalarField, C64};
pub use kernels::{AnalyticFunction, PoissonKernelParams};
