//! Repeated estimation on fresh synthetic draws: RMSE, coverage, CI width.

use std::io::Write;

use serde::Serialize;

use super::bounds::true_bounds_with;
use super::dgp::{derive_seed, sample, DgpSpec};
use crate::ahe::{cross_fit, summarize_scores, EstimateOptions};
use crate::error::{Error, Result};
use crate::estimands::{build_spec, EstimandKind};
use crate::exec::Execution;
use crate::nuisance::LearnerConfig;
use crate::stats::pairwise_sum;

#[derive(Debug, Clone)]
pub struct ReplicationPlan {
    pub dgp: DgpSpec,
    pub estimands: Vec<EstimandKind>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub learners: LearnerConfig,
    pub folds: usize,
    pub ci_level: f64,
    /// Monte-Carlo draws for the true endpoints.
    pub mc_draws: usize,
    /// How replications are scheduled. Results do not depend on it.
    pub execution: Execution,
}

impl ReplicationPlan {
    pub fn new(dgp: DgpSpec, estimands: Vec<EstimandKind>, n_grid: Vec<usize>, reps: usize, learners: LearnerConfig) -> Self {
        Self {
            dgp,
            estimands,
            n_grid,
            reps,
            learners,
            folds: 5,
            ci_level: 0.95,
            mc_draws: 1_000_000,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Ahe,
    Plugin,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ahe => "ahe",
            Estimator::Plugin => "plugin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub n: usize,
    pub estimand: String,
    pub estimator: Estimator,
    pub truth: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_ci_width: f64,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationTable {
    pub rows: Vec<ReplicationRow>,
}

impl ReplicationTable {
    pub fn find(&self, n: usize, estimand: &str, estimator: Estimator) -> Option<&ReplicationRow> {
        self.rows.iter().find(|r| r.n == n && r.estimand == estimand && r.estimator == estimator)
    }

    /// Writes `n,estimand,estimator,rmse,coverage,mean_ci_width,reps,seed`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "estimand", "estimator", "rmse", "coverage", "mean_ci_width", "reps", "seed"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.estimand.clone(),
                r.estimator.name().to_string(),
                r.rmse.to_string(),
                r.coverage.to_string(),
                r.mean_ci_width.to_string(),
                r.reps.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One replication's (point, ci lo, ci hi) per estimand and estimator.
type RepOutcome = Vec<[[f64; 3]; 2]>;

fn sorted_mean(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    pairwise_sum(&v) / v.len() as f64
}

pub fn replicate(plan: &ReplicationPlan) -> Result<ReplicationTable> {
    plan.dgp.validate()?;
    if plan.reps < 2 {
        return Err(Error::InvalidConfig(format!("reps = {} must be at least 2", plan.reps)));
    }
    if plan.n_grid.is_empty() || plan.estimands.is_empty() {
        return Err(Error::InvalidConfig("replication needs at least one n and one estimand".into()));
    }
    let specs = plan.estimands.iter().map(build_spec).collect::<Result<Vec<_>>>()?;
    let truths = plan
        .estimands
        .iter()
        .map(|k| Ok(true_bounds_with(&plan.dgp, k, plan.mc_draws, plan.execution)?.endpoint(k).0))
        .collect::<Result<Vec<f64>>>()?;
    // Replications are the unit of parallel work; each fit runs sequentially.
    let opts = EstimateOptions { folds: plan.folds, ci_level: plan.ci_level, shuffle: false, execution: Execution::Sequential };

    let mut rows = Vec::new();
    for (ni, &n) in plan.n_grid.iter().enumerate() {
        let outcomes: Vec<RepOutcome> = plan.execution.try_map(plan.reps, |rep| -> Result<RepOutcome> {
            let stream = ((ni as u64) << 32) | rep as u64;
            let data = sample(&plan.dgp.with_seed(derive_seed(plan.dgp.seed, stream)), n)?;
            specs
                .iter()
                .map(|spec| {
                    let fit = cross_fit(&data, spec, &plan.learners, &opts)?;
                    let ahe = summarize_scores(&fit.phi, plan.ci_level)?;
                    let plug = fit.plugin_summary(plan.ci_level)?;
                    Ok([[ahe.point, ahe.ci.lo, ahe.ci.hi], [plug.point, plug.ci.lo, plug.ci.hi]])
                })
                .collect()
        })?;
        for (ki, kind) in plan.estimands.iter().enumerate() {
            let truth = truths[ki];
            for (ei, estimator) in [Estimator::Ahe, Estimator::Plugin].into_iter().enumerate() {
                let results: Vec<[f64; 3]> = outcomes.iter().map(|o| o[ki][ei]).collect();
                let sq = results.iter().map(|r| (r[0] - truth).powi(2)).collect();
                let hits = results.iter().filter(|r| r[1] <= truth && truth <= r[2]).count();
                let widths = results.iter().map(|r| r[2] - r[1]).collect();
                rows.push(ReplicationRow {
                    n,
                    estimand: kind.cli_name().to_string(),
                    estimator,
                    truth,
                    rmse: sorted_mean(sq).sqrt(),
                    coverage: hits as f64 / plan.reps as f64,
                    mean_ci_width: sorted_mean(widths),
                    reps: plan.reps,
                    seed: plan.dgp.seed,
                });
            }
        }
    }
    Ok(ReplicationTable { rows })
}
