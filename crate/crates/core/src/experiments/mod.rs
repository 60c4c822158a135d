//! Monte Carlo estimators with confidence intervals, parameter sweeps and
//! numerical checks of auxiliary inequalities.
//!
//! Every estimator is a pure function of its arguments and seed: trials are
//! split into fixed-size chunks, each with its own derived random stream,
//! and chunk results are reduced in chunk order.

mod claims;
mod estimators;
pub mod quadrature;
mod stats;
mod sweep;

pub use claims::{check_claim, verify_appendix_claims, ClaimCheckReport, ClaimId, CLAIM_TOLERANCE};
pub use estimators::{
    estimate_covariance, estimate_coverage_prob, estimate_joint_prob, estimate_moments, estimate_single_subset_prob,
    MIN_TRIALS,
};
pub use stats::{frequency_stderr, write_summaries_csv, ExperimentKind, TrialSummary, Verdict, CI_MULTIPLIER};
pub use sweep::{sweep, SweepAxis, SweepExperiment};
