//! Numerical core for studying majorisation of random spectra.
//!
//! The crate is organised bottom-up:
//!
//! * [`eigensolve`]: Householder tridiagonalisation and implicit-shift QL for
//!   Hermitian eigenvalues, plus singular values of complex rectangular matrices.
//! * [`rng`] and [`ensembles`]: counter-based random streams, complex Gaussian
//!   matrices, Wishart–Laguerre spectra (dense and bidiagonal paths) and
//!   uniform simplex vectors.
//! * [`majorization`]: suffix-sum dominance, Vidal's conversion probability and
//!   convex-function dominance.
//! * [`quadrature`] and [`limitlaws`]: Gauss rules and the limit-law integrals
//!   (Marchenko–Pastur and semicircle means, the covariance functional, the
//!   exponential kernel integral).
//! * [`stats`]: linear eigenvalue statistics, moment accumulation, CLT
//!   diagnostics, persistence of iterated sums and power-law fits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigensolve;
pub mod ensembles;
mod error;
pub mod limitlaws;
pub mod majorization;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use eigensolve::{ComplexMatrix, HermitianMatrix, SpectrumRaw, SymTridiagonal};
pub use ensembles::{EnsembleParams, SamplerPath, SimplexVector, WishartSample};
pub use error::{Error, Result};
pub use limitlaws::{GammaMode, LimitConstants, MpParams, PrefactorMode, TestFunction};
pub use majorization::MajorizationReport;
pub use quadrature::QuadratureGrid;
pub use rng::RngStream;
pub use stats::{MomentSummary, PersistenceResult, PowerLawFit, ScalingMode};
