use nalgebra::{DMatrix, DVector};

use super::{Predictor, Rows};
use crate::error::{Error, Result};
use crate::stats::sigmoid;

/// Affine model `b0 + b·x`, optionally passed through the logistic link.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub logistic: bool,
}

fn design(rows: Rows<'_>) -> DMatrix<f64> {
    let p = rows.dim() + 1;
    DMatrix::from_fn(rows.len(), p, |i, j| if j == 0 { 1.0 } else { rows.row(i)[j - 1] })
}

/// Ridge matrix that leaves the intercept unpenalised.
fn penalty(p: usize, ridge: f64) -> DMatrix<f64> {
    let mut m = DMatrix::from_diagonal_element(p, p, ridge);
    m[(0, 0)] = 0.0;
    m
}

fn solve_spd(mut h: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let mut jitter = 1e-12;
    for _ in 0..12 {
        if let Some(chol) = h.clone().cholesky() {
            return Ok(chol.solve(rhs));
        }
        for i in 0..h.nrows() {
            h[(i, i)] += jitter;
        }
        jitter *= 100.0;
    }
    Err(Error::Invariant("normal equations are not positive definite".into()))
}

impl LinearModel {
    /// Ridge least squares.
    pub fn fit_least_squares(rows: Rows<'_>, targets: &[f64], ridge: f64) -> Result<Self> {
        let x = design(rows);
        let y = DVector::from_column_slice(targets);
        let xt = x.transpose();
        let h = &xt * &x + penalty(x.ncols(), ridge);
        let beta = solve_spd(h, &(&xt * y))?;
        Ok(Self { coefficients: beta.iter().copied().collect(), logistic: false })
    }

    /// Penalised logistic regression by damped Newton iterations.
    pub fn fit_logistic(rows: Rows<'_>, labels: &[f64], ridge: f64, max_iter: usize, grad_tol: f64) -> Result<Self> {
        let x = design(rows);
        let (n, p) = (x.nrows(), x.ncols());
        let y = DVector::from_column_slice(labels);
        let pen = penalty(p, ridge);
        let mean = crate::stats::mean(labels).clamp(1e-6, 1.0 - 1e-6);
        let mut beta = DVector::zeros(p);
        beta[0] = (mean / (1.0 - mean)).ln();

        let objective = |beta: &DVector<f64>| -> f64 {
            let eta = &x * beta;
            let mut nll = 0.0;
            for i in 0..n {
                // log(1 + exp(t)) - y t, computed stably
                let t = eta[i];
                let softplus = if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
                nll += softplus - y[i] * t;
            }
            nll + 0.5 * beta.dot(&(&pen * beta))
        };

        let mut current = objective(&beta);
        for _ in 0..max_iter {
            let eta = &x * &beta;
            let prob = eta.map(sigmoid);
            let grad = x.transpose() * (&prob - &y) + &pen * &beta;
            if grad.amax() < grad_tol {
                break;
            }
            let weights = prob.map(|q| (q * (1.0 - q)).max(1e-12));
            let mut xw = x.clone();
            for (i, mut row) in xw.row_iter_mut().enumerate() {
                row *= weights[i];
            }
            let h = x.transpose() * xw + &pen;
            let step = solve_spd(h, &grad)?;
            let mut scale = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let candidate = &beta - &step * scale;
                let value = objective(&candidate);
                if value <= current {
                    beta = candidate;
                    current = value;
                    improved = true;
                    break;
                }
                scale *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Ok(Self { coefficients: beta.iter().copied().collect(), logistic: true })
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.coefficients[0] + self.coefficients[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

impl Predictor for LinearModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let t = self.linear_predictor(x);
        if self.logistic {
            sigmoid(t)
        } else {
            t
        }
    }
}
