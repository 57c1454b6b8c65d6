//! Ground truth: the synthetic population, Monte-Carlo true bounds, the
//! brute-force coupling search, margin diagnostics, and the replication harness.

mod bounds;
mod coupling;
mod dgp;
mod margin;
mod replicate;

pub use bounds::{true_bounds, true_bounds_with, TrueBounds};
pub use coupling::{
    coupling_bounds_bruteforce, oracle_agreement, random_case, AgreementReport, AgreementRow, CouplingAtom,
    CouplingInstance, JointLaw, DEFAULT_GRID,
};
pub use dgp::{
    derive_seed, dgp_mu, dgp_propensity, draw_covariates, orthant_law, sample, stream_rng, xi, DgpSpec, DGP_DIM,
};
pub use margin::{margin_profile, MarginProfile};
pub use replicate::{replicate, Estimator, ReplicationPlan, ReplicationRow, ReplicationTable};
