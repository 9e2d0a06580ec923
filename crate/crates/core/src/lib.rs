//! Upwind finite-volume transport on 1-D and triangulated periodic meshes,
//! together with the exact Markov-chain reading of the scheme.
//!
//! The scheme `u^{n+1} = P u^n` is stored as a row-stochastic kernel over
//! cells. The same kernel drives the chain sampler, so the backward
//! Kolmogorov identity `u_K^n = E_K[u^0_{K_n}]` can be checked by exhaustive
//! path enumeration on small instances and by Monte Carlo on larger ones.
//!
//! Module map:
//! - [`mesh`]: geometry builders, validation and JSON persistence
//! - [`field`]: velocity catalog and its face/cell moments
//! - [`kernel`]: forward, co- and reversed kernels plus residual diagnostics
//! - [`solver`]: the deterministic scheme, reference solutions and error norms
//! - [`chain`]: path sampling, random characteristics and their decomposition
//! - [`analysis`]: the verification studies built on top of the above

pub mod analysis;
pub mod chain;
pub mod config;
pub mod error;
pub mod field;
pub mod geometry;
pub mod kernel;
pub mod mesh;
pub mod quadrature;
pub mod rng;
pub mod solver;

pub use chain::{ChainPath, Decomposition, McEstimate, Trajectory};
pub use error::{Error, Result};
pub use field::{FieldMoments, VelocityField};
pub use geometry::Point;
pub use kernel::{EnteringBarycenters, KernelKind, TransitionKernel};
pub use mesh::{Cell, Face, GeometryReport, Mesh};
pub use solver::{CellField, DatumKind, ErrorReport, InitialDatum};
