//! Supervised learners behind the nuisance fitters.

mod boosting;
mod knn;
mod linear;
mod partition;

use std::sync::Arc;

pub use boosting::StumpBoost;
pub use knn::NearestMean;
pub use linear::LinearModel;
pub use partition::CellMeans;

use super::config::{Learner, LearnerConfig};
use crate::error::{Error, Result};

/// A fitted function of the covariates.
pub trait Predictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;
}

impl<F> Predictor for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn predict(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

pub type SharedPredictor = Arc<dyn Predictor>;

/// Row-major covariate matrix view.
#[derive(Debug, Clone, Copy)]
pub struct Rows<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Rows<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "ragged covariate matrix");
        Self { data, dim }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Loss the learner minimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Targets in `[0,1]`; predictions are probabilities.
    Classification,
    /// Real targets; squared loss.
    Regression,
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantPredictor(pub f64);

impl Predictor for ConstantPredictor {
    fn predict(&self, _x: &[f64]) -> f64 {
        self.0
    }
}

/// Fits `learner` to `(rows, targets)`.
///
/// Constant targets always produce a [`ConstantPredictor`]; callers decide
/// whether that deserves a warning.
pub fn fit(learner: Learner, rows: Rows<'_>, targets: &[f64], task: Task, cfg: &LearnerConfig) -> Result<SharedPredictor> {
    if rows.is_empty() || rows.len() != targets.len() {
        return Err(Error::InvalidInput(format!(
            "cannot fit on {} rows with {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let mean = crate::stats::mean(targets);
    if targets.iter().all(|&t| t == targets[0]) {
        return Ok(Arc::new(ConstantPredictor(targets[0])));
    }
    Ok(match learner {
        Learner::Constant => Arc::new(ConstantPredictor(mean)),
        Learner::Logistic => Arc::new(match task {
            Task::Classification => LinearModel::fit_logistic(rows, targets, cfg.ridge, cfg.max_iter, cfg.grad_tol)?,
            Task::Regression => LinearModel::fit_least_squares(rows, targets, cfg.ridge)?,
        }),
        Learner::BoostedStumps => Arc::new(StumpBoost::fit(rows, targets, task, cfg.rounds, cfg.learning_rate)),
        Learner::KNearestMean => {
            let k = cfg.k.unwrap_or_else(|| (rows.len() as f64).sqrt().ceil() as usize);
            Arc::new(NearestMean::fit(rows, targets, k))
        }
        Learner::Partition => Arc::new(CellMeans::fit(
            rows,
            targets,
            cfg.partition_bins,
            cfg.partition_cuts,
            cfg.partition_prior,
        )),
    })
}
