//! Multidimensional random subset sum in the ∞-norm.
//!
//! Given i.i.d. Gaussian vectors `X_1, …, X_n ∈ R^d`, how large must `n` be
//! before every target `z ∈ [-1, 1]^d` is within `ε` of some subset sum?
//! This crate provides the pieces to study that question numerically:
//!
//! - [`params`]: validated problem parameters, seeds and distances;
//! - [`sampler`]: seeded sample matrices, quantisation and file formats;
//! - [`family`]: random low-intersection subset families;
//! - [`bounds`]: closed-form probability and sample-size bounds in log₂ space;
//! - [`search`]: exact exhaustive and meet-in-the-middle subset-sum search;
//! - [`experiments`]: Monte Carlo estimators checked against the bounds;
//! - [`nne`]: random-network approximation via gene-tensor sums;
//! - [`walks`]: the branching walk over prefix subset sums.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod family;
pub mod nne;
pub mod params;
pub mod sampler;
pub mod search;
pub mod walks;

pub use error::{Error, ParamError, Result};
pub use family::{build_family, validate_family, SubsetFamily};
pub use params::{derive_seed, linf_distance, DeclaredRange, ProblemParams, Target};
pub use sampler::SampleMatrix;
pub use search::{Engine, SearchResult};
