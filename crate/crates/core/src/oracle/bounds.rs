//! Monte-Carlo sharp bounds under the synthetic population.

use serde::Serialize;

use super::dgp::{draw_covariates, stream_rng, DgpSpec, DGP_DIM};
use crate::data::Arm;
use crate::error::{Error, Result};
use crate::estimands::{bound_terms, EstimandKind};
use crate::exec::Execution;
use crate::policy::Policy;
use crate::spec::Interval;
use crate::stats::pairwise_sum;

const CHUNK: usize = 1 << 14;

/// Monte-Carlo bounds with the standard error of each endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrueBounds {
    pub interval: Interval,
    pub se_lo: f64,
    pub se_hi: f64,
    pub draws: usize,
}

impl TrueBounds {
    /// The endpoint an estimand targets, with its standard error.
    pub fn endpoint(&self, kind: &EstimandKind) -> (f64, f64) {
        match kind.endpoint() {
            crate::estimands::Endpoint::Lower => (self.interval.lo, self.se_lo),
            crate::estimands::Endpoint::Upper => (self.interval.hi, self.se_hi),
        }
    }
}

enum Mode {
    Policies(Policy, Policy),
    Optimal,
}

pub fn true_bounds(dgp: &DgpSpec, kind: &EstimandKind, mc_draws: usize) -> Result<TrueBounds> {
    true_bounds_with(dgp, kind, mc_draws, Execution::default())
}

/// As [`true_bounds`]; the result does not depend on `execution`.
pub fn true_bounds_with(dgp: &DgpSpec, kind: &EstimandKind, mc_draws: usize, execution: Execution) -> Result<TrueBounds> {
    dgp.validate()?;
    if mc_draws < 10_000 {
        return Err(Error::InvalidConfig(format!("mc_draws {mc_draws} is below the minimum of 10000")));
    }
    let mode = match kind {
        EstimandKind::CvarIte { .. } => {
            return Err(Error::Unsupported("true bounds for cvar-ite come from cvar_ite_bounds".into()))
        }
        EstimandKind::FnaUpperOptimal => Mode::Optimal,
        other => {
            let (pi0, pi1) = other.policies().expect("policy estimands carry policies");
            Mode::Policies(pi0, pi1)
        }
    };
    let chunks = mc_draws.div_ceil(CHUNK);
    // [sum lo, sum lo^2, sum hi, sum hi^2] per chunk
    let sums = execution.map(chunks, |c| {
        let len = CHUNK.min(mc_draws - c * CHUNK);
        let mut rng = stream_rng(dgp.seed, c as u64);
        let mut x = [0.0; DGP_DIM];
        let mut lo = Vec::with_capacity(len);
        let mut hi = Vec::with_capacity(len);
        for _ in 0..len {
            draw_covariates(&mut rng, &mut x);
            let (m0, m1) = (dgp.mu(&x, Arm::Control), dgp.mu(&x, Arm::Treated));
            let (l, h) = match &mode {
                Mode::Policies(pi0, pi1) => bound_terms(pi0.indicator(&x), pi1.indicator(&x), m0, m1),
                Mode::Optimal => (0.0, m0.min(1.0 - m0).min(m1).min(1.0 - m1)),
            };
            lo.push(l);
            hi.push(h);
        }
        let sq = |v: &[f64]| pairwise_sum(&v.iter().map(|t| t * t).collect::<Vec<_>>());
        [pairwise_sum(&lo), sq(&lo), pairwise_sum(&hi), sq(&hi)]
    });
    let total = |j: usize| pairwise_sum(&sums.iter().map(|s| s[j]).collect::<Vec<_>>());
    let n = mc_draws as f64;
    let (mean_lo, mean_hi) = (total(0) / n, total(2) / n);
    let se = |mean: f64, sq: f64| ((sq / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
    Ok(TrueBounds {
        interval: Interval::new(mean_lo, mean_hi)?,
        se_lo: se(mean_lo, total(1)),
        se_hi: se(mean_hi, total(3)),
        draws: mc_draws,
    })
}
