//! Deterministic treatment policies `x -> arm`.

use std::fmt;
use std::sync::Arc;

use crate::data::Arm;

pub type ScoreFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type RuleFn = Arc<dyn Fn(&[f64]) -> Arm + Send + Sync>;

/// A total map from covariates to an arm.
#[derive(Clone)]
pub enum Policy {
    Constant(Arm),
    /// Treat iff `x[column] > cutoff`.
    Threshold { column: usize, cutoff: f64 },
    /// Treat iff `score(x) > 0`.
    SignOf(ScoreFn),
    Custom(RuleFn),
}

impl Policy {
    pub fn never() -> Self {
        Policy::Constant(Arm::Control)
    }

    pub fn always() -> Self {
        Policy::Constant(Arm::Treated)
    }

    pub fn sign_of(score: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Policy::SignOf(Arc::new(score))
    }

    pub fn custom(rule: impl Fn(&[f64]) -> Arm + Send + Sync + 'static) -> Self {
        Policy::Custom(Arc::new(rule))
    }

    pub fn assign(&self, x: &[f64]) -> Arm {
        let treat = match self {
            Policy::Constant(arm) => return *arm,
            Policy::Threshold { column, cutoff } => x[*column] > *cutoff,
            Policy::SignOf(score) => score(x) > 0.0,
            Policy::Custom(rule) => return rule(x),
        };
        if treat {
            Arm::Treated
        } else {
            Arm::Control
        }
    }

    /// The arm as 0.0 or 1.0.
    pub fn indicator(&self, x: &[f64]) -> f64 {
        self.assign(x).as_f64()
    }

    /// The policy that always assigns the other arm.
    pub fn complement(&self) -> Policy {
        let inner = self.clone();
        Policy::custom(move |x| match inner.assign(x) {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        })
    }
}

impl fmt::Debug for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Constant(arm) => write!(f, "Constant({})", arm.index()),
            Policy::Threshold { column, cutoff } => write!(f, "Threshold(x[{column}] > {cutoff})"),
            Policy::SignOf(_) => f.write_str("SignOf(<fn>)"),
            Policy::Custom(_) => f.write_str("Custom(<fn>)"),
        }
    }
}

/// Coefficient functions derived from a pair of policies `(pi0, pi1)`.
///
/// `active(x) = (pi1(x) - pi0(x))^2` marks the covariates where the two
/// policies disagree; every hinge triple vanishes where it is 0.
#[derive(Clone, Debug)]
pub struct PolicyIndicators {
    pub pi0: Policy,
    pub pi1: Policy,
}

impl PolicyIndicators {
    pub fn active(&self, x: &[f64]) -> f64 {
        let d = self.pi1.indicator(x) - self.pi0.indicator(x);
        d * d
    }

    /// Linear part of the upper bound: `(pi1(1-pi0), pi0(1-pi1), 0)`.
    pub fn upper_base(&self, x: &[f64]) -> [f64; 3] {
        let (p0, p1) = (self.pi0.indicator(x), self.pi1.indicator(x));
        [p1 * (1.0 - p0), p0 * (1.0 - p1), 0.0]
    }

    /// Hinge of the upper bound: `(-s, -s, s)`, i.e. `eta = s (1 - sigma)`.
    pub fn upper_hinge(&self, x: &[f64]) -> [f64; 3] {
        let s = self.active(x);
        [-s, -s, s]
    }

    /// Hinge of the lower bound: `(pi0 - pi1, pi1 - pi0, 0)`, i.e. `eta = (pi1 - pi0) tau`.
    pub fn lower_hinge(&self, x: &[f64]) -> [f64; 3] {
        let d = self.pi1.indicator(x) - self.pi0.indicator(x);
        [-d, d, 0.0]
    }
}

/// Returns the indicator bundle for `(pi0, pi1)`.
pub fn policy_indicator_functions(pi0: &Policy, pi1: &Policy) -> PolicyIndicators {
    PolicyIndicators { pi0: pi0.clone(), pi1: pi1.clone() }
}
