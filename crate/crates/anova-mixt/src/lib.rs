//! Interpretable high-dimensional function approximation from scattered
//! samples, built on tensor-product bases that mix Fourier exponentials,
//! half-period cosines, and Chebyshev polynomials per dimension.
//!
//! The pipeline, bottom to top:
//!
//! * [`basis`] — the three one-dimensional families, tensor products, the
//!   arcsine weight, and the node transform onto the torus;
//! * [`index`] — tensor grids, reduced (full-support) grids, subset families,
//!   and their cardinalities;
//! * [`nfft`] — nonequispaced FFTs on the torus (direct oracles plus a
//!   windowed fast path);
//! * [`nfmt`] — the mixed-basis transform obtained by coefficient expansion
//!   and one torus NFFT;
//! * [`grouped`] — block transforms over a family of coordinate subsets,
//!   the computational core of fitting low-superposition models;
//! * [`lsqr`] — matrix-free complex least squares;
//! * [`model`] — fitting, prediction, variance decomposition, sensitivity
//!   indices, family truncation, and bandwidth searches;
//! * [`data`] — node sampling, reference targets, CSV ingestion, and
//!   normalization;
//! * [`experiments`] — reproducible end-to-end studies used by the CLI.

pub mod basis;
pub mod data;
pub mod error;
pub mod experiments;
pub mod grouped;
pub mod index;
pub mod lsqr;
pub mod model;
pub mod nfft;
pub mod nfmt;

pub use basis::{BasisKind, BasisVector, NodeSet};
pub use error::{Error, Result};
pub use grouped::{GroupedCoefficients, GroupedTransform};
pub use index::{Bandwidths, SubsetFamily};
pub use lsqr::{LinearOperator, LsqrOptions, SolveReport, StopReason};
pub use model::{GsiTable, MixedModel, Validation};
