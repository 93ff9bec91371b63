//! Approximate eigenfunctions on model manifolds.
//!
//! Test functions are products of a plateau cutoff `χ(r/R)` with a radial
//! exponential, so the defect `(Δ + λ)u` is supported on the transitions
//! plus whatever `Δr` leaves on the plateau. [`defect_norms`] evaluates the
//! norms entering the criteria and [`search_parameters`] picks the layout.

mod cutoff;
mod norms;
mod search;
mod testfn;

pub use cutoff::{Cutoff, CutoffSpec, TransitionShape};
pub use norms::{defect_norms, weighted_volume, DefectNorms, NormErrors};
pub use search::{
    check_hypotheses, hypothesis_radius, search_parameters, search_parameters_with, search_weighted,
    transition_width, SearchBranch, SearchOutcome, SearchStep,
};
pub use testfn::{
    build_phase_testfn, build_soliton_testfn, build_tent_testfn, build_weighted_testfn, Jet, Kink,
    PotentialKind, RadialTestFunction, TestFnKind,
};

/// Builds the cutoff described by `spec`.
pub fn build_cutoff(spec: &CutoffSpec) -> crate::Result<Cutoff> {
    spec.build()
}
