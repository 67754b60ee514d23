//! genRBF: a Gaussian RBF kernel for incomplete data.
//!
//! Every incomplete point is viewed as an affine subspace `x + V` of all its
//! completions. A single Gaussian `N(m, Σ)`, estimated from the incomplete
//! training data, turns each subspace into a (degenerate) conditional Gaussian
//! supported on it. The kernel is the normalized `L₂` inner product of these
//! Gaussians after convolution with `N(0, σ²I)`. On complete points it reduces
//! exactly to the classical RBF kernel `exp(-γ‖x - y‖²)`.
//!
//! Pipeline:
//!
//! 1. [`data`] loads and standardizes datasets with explicit missing masks.
//! 2. [`subspace`] builds the `x + V` representation and applies affine maps.
//! 3. [`density`] estimates `N(m, Σ)` by EM under MAR.
//! 4. [`representation`] conditions the Gaussian on each subspace.
//! 5. [`kernel`] evaluates the kernel and assembles Gram matrices.
//! 6. [`svm`] trains a soft-margin SVM on a precomputed Gram matrix.
//!
//! [`missingness`], [`bench`] and [`stats`] cover the experimental protocol:
//! MCAR/MAR/NMAR injection, double cross-validation with grid search, and
//! rank-based significance tests.

pub mod bench;
pub mod data;
pub mod datasets;
pub mod density;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod missingness;
pub mod representation;
pub mod rng;
pub mod stats;
pub mod subspace;
pub mod svm;

pub use data::{Dataset, IncompletePoint, StandardizationParams};
pub use density::GaussianModel;
pub use error::{Error, Result};
pub use kernel::{GramMatrix, KernelParams};
pub use representation::PointRepresentation;
pub use subspace::MissingSubspacePoint;
pub use svm::SvmModel;
