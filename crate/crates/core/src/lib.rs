//! Sharp bounds on the fraction of individuals negatively affected by a
//! treatment change, and cross-fitted, doubly robust inference on them.
//!
//! Every bound endpoint is an Average Hinge Effect (AHE): the mean of a
//! linear form in `(mu0, mu1, 1)` plus signed hinges `min{0, eta_l}` of further
//! linear forms. [`estimands::build_spec`] encodes each endpoint as an
//! [`AheSpec`], and [`ahe::estimate`] runs the cross-fitted estimator on an
//! [`ObservationTable`].
//!
//! ```no_run
//! use harmbound::{ahe, estimands, nuisance::LearnerConfig, oracle};
//!
//! let data = oracle::sample(&oracle::DgpSpec::new(3.0, 1).unwrap(), 3200).unwrap();
//! let spec = estimands::build_spec(&estimands::EstimandKind::FnaLower).unwrap();
//! let report = ahe::estimate(&data, &spec, &LearnerConfig::default(), &Default::default()).unwrap();
//! println!("{}", report.summary());
//! ```

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ahe;
pub mod data;
pub mod error;
pub mod estimands;
pub mod exec;
pub mod folds;
pub mod nuisance;
pub mod oracle;
pub mod policy;
pub mod spec;
pub mod stats;

pub use ahe::{estimate, EstimateOptions, EstimateReport};
pub use data::{Arm, ObservationTable};
pub use error::{Error, Result};
pub use estimands::{build_spec, EstimandKind};
pub use exec::Execution;
pub use nuisance::LearnerConfig;
pub use policy::Policy;
pub use spec::{AheSpec, Interval};
