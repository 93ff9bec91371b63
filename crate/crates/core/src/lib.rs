//! Numerical certification of spectral intervals for the Laplacian on
//! rotationally symmetric model manifolds.
//!
//! The crate builds explicit approximate eigenfunctions on manifolds with
//! metric `dr² + f(r)² g_{S^{n-1}}`, evaluates the `L∞·L¹/L²` criterion on
//! them, and cross-checks the resulting intervals against the spectrum of a
//! truncated radial Sturm–Liouville operator.
//!
//! Module map:
//!
//! * [`model_manifold`] warping profiles, radial geometry, volume asymptotics
//! * [`quadrature`] adaptive Simpson integration used for every norm
//! * [`weyl_sequence`] cutoffs, radial test functions, defect norms, parameter search
//! * [`criterion`] the `L∞·L¹`, `L²` and boundary criteria plus the matrix-level check
//! * [`oracle`] tridiagonal discretization and Sturm-sequence bisection
//! * [`mollifier`] 1D mollification and the cylinder cut-locus demo
//! * [`scenario`] end-to-end scenario runner and report emission

// `!(x > y)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criterion;
pub mod error;
pub mod model_manifold;
pub mod mollifier;
pub mod oracle;
pub mod quadrature;
pub mod scenario;
pub mod weyl_sequence;

pub use error::{Error, Result};
