//! Exact population evaluators over finitely supported covariate laws.

use super::phi_with_propensity;
use crate::data::Arm;
use crate::error::{Error, Result};
use crate::nuisance::NuisanceBundle;
use crate::spec::AheSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: Vec<f64>,
    pub prob: f64,
}

/// A covariate law with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomLaw {
    atoms: Vec<Atom>,
}

impl AtomLaw {
    /// Probabilities must be nonnegative and sum to one within 1e-12.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("atom law needs at least one atom".into()));
        }
        if atoms.iter().any(|a| !(a.prob >= 0.0) || !a.prob.is_finite()) {
            return Err(Error::InvalidInput("atom probabilities must be nonnegative".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("atom probabilities sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    /// Atoms `x = [i]` for `i = 0..probs.len()`.
    pub fn indexed(probs: &[f64]) -> Result<Self> {
        Self::new(probs.iter().enumerate().map(|(i, &p)| Atom { x: vec![i as f64], prob: p }).collect())
    }

    pub fn single(x: Vec<f64>) -> Self {
        Self { atoms: vec![Atom { x, prob: 1.0 }] }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `E[f(X)]`.
    pub fn expect(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.prob * f(&a.x)).sum()
    }

    pub fn try_expect(&self, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for a in &self.atoms {
            total += a.prob * f(&a.x)?;
        }
        Ok(total)
    }
}

fn check_mu(mu: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&mu) {
        Ok(mu)
    } else {
        Err(Error::InvalidInput(format!("outcome mean {mu} outside [0,1]")))
    }
}

/// Exact AHE under the atom law.
pub fn population_ahe(mu: &dyn Fn(&[f64], Arm) -> f64, law: &AtomLaw, spec: &AheSpec) -> Result<f64> {
    law.try_expect(|x| {
        let (m0, m1) = (check_mu(mu(x, Arm::Control))?, check_mu(mu(x, Arm::Treated))?);
        Ok(spec.integrand(x, m0, m1))
    })
}

/// Exact `E[phi(X, A, Y)]` when `A | X ~ Bernoulli(e(X))` and
/// `Y | X, A ~ Bernoulli(mu(X, A))`, with the score built from `bundle`.
pub fn population_phi_mean(
    mu: &dyn Fn(&[f64], Arm) -> f64,
    e: &dyn Fn(&[f64]) -> f64,
    law: &AtomLaw,
    bundle: &NuisanceBundle,
    spec: &AheSpec,
) -> Result<f64> {
    law.try_expect(|x| {
        let p_treat = e(x);
        if !(p_treat > 0.0 && p_treat < 1.0) {
            return Err(Error::InvalidInput(format!("true propensity {p_treat} outside (0,1)")));
        }
        let e_hat = bundle.e_hat(x);
        let mut total = 0.0;
        for a in Arm::BOTH {
            let p_a = if a == Arm::Treated { p_treat } else { 1.0 - p_treat };
            let p_y1 = check_mu(mu(x, a))?;
            for (y, p_y) in [(0u8, 1.0 - p_y1), (1u8, p_y1)] {
                if p_y == 0.0 {
                    continue;
                }
                total += p_a * p_y * phi_with_propensity(x, a, y, e_hat, bundle, spec)?;
            }
        }
        Ok(total)
    })
}
