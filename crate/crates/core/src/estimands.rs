//! Estimands of interest, their AHE encodings, and closed-form sharp bounds
//! over finitely supported covariate laws.
//!
//! For policies `pi0, pi1` the fraction negatively affected by switching from
//! `pi0` to `pi1` is only partially identified. Its sharp bounds are
//!
//! ```text
//! lo = E[max{(pi0 - pi1) tau, 0}]
//! hi = E[min{pi1 (1-pi0) mu0 + pi0 (1-pi1) (1-mu0),
//!            pi1 (1-pi0) (1-mu1) + pi0 (1-pi1) mu1}]
//! ```

use std::fmt;
use std::sync::Arc;

use crate::ahe::AtomLaw;
use crate::data::Arm;
use crate::error::{Error, Result};
use crate::policy::{policy_indicator_functions, Policy};
use crate::spec::{constant_coefficients, AheSpec, EtaRole, Interval, Sign};

/// The estimands exposed by the library and CLI.
#[derive(Clone)]
pub enum EstimandKind {
    /// Lower bound for the wholesale change `0 -> 1`.
    FnaLower,
    /// Upper bound for the wholesale change `0 -> 1`.
    FnaUpper,
    FnaLowerPolicy { pi0: Policy, pi1: Policy },
    FnaUpperPolicy { pi0: Policy, pi1: Policy },
    /// Upper bound on the misclassification rate of the optimal policy.
    FnaUpperOptimal,
    /// Conditional value at risk of the individual effect at level `alpha`.
    CvarIte { alpha: f64 },
}

/// Which end of an identified interval an estimand targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Lower,
    Upper,
}

impl EstimandKind {
    pub fn cli_name(&self) -> &'static str {
        match self {
            EstimandKind::FnaLower => "fna-lower",
            EstimandKind::FnaUpper => "fna-upper",
            EstimandKind::FnaLowerPolicy { .. } => "fna-lower-policy",
            EstimandKind::FnaUpperPolicy { .. } => "fna-upper-policy",
            EstimandKind::FnaUpperOptimal => "fna-upper-optimal",
            EstimandKind::CvarIte { .. } => "cvar-ite",
        }
    }

    /// Parses a CLI name. Policy kinds take their policies as arguments and
    /// `cvar-ite` takes `alpha`.
    pub fn from_cli_name(name: &str, policies: Option<(Policy, Policy)>, alpha: Option<f64>) -> Result<Self> {
        let need_policies = |p: Option<(Policy, Policy)>| {
            p.ok_or_else(|| Error::InvalidConfig(format!("estimand {name} needs --pi0 and --pi1")))
        };
        Ok(match name {
            "fna-lower" => EstimandKind::FnaLower,
            "fna-upper" => EstimandKind::FnaUpper,
            "fna-upper-optimal" => EstimandKind::FnaUpperOptimal,
            "fna-lower-policy" => {
                let (pi0, pi1) = need_policies(policies)?;
                EstimandKind::FnaLowerPolicy { pi0, pi1 }
            }
            "fna-upper-policy" => {
                let (pi0, pi1) = need_policies(policies)?;
                EstimandKind::FnaUpperPolicy { pi0, pi1 }
            }
            "cvar-ite" => {
                let alpha = alpha.ok_or_else(|| Error::InvalidConfig("cvar-ite needs --alpha".into()))?;
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::InvalidConfig(format!("alpha {alpha} must lie in (0,1)")));
                }
                EstimandKind::CvarIte { alpha }
            }
            other => return Err(Error::InvalidConfig(format!("unknown estimand {other:?}"))),
        })
    }

    pub fn endpoint(&self) -> Endpoint {
        match self {
            EstimandKind::FnaLower | EstimandKind::FnaLowerPolicy { .. } => Endpoint::Lower,
            _ => Endpoint::Upper,
        }
    }

    /// The policy pair `(pi0, pi1)` whose switch the estimand describes.
    /// For the optimal policy this needs the CATE, so it is `None`.
    pub fn policies(&self) -> Option<(Policy, Policy)> {
        match self {
            EstimandKind::FnaLower | EstimandKind::FnaUpper => Some((Policy::never(), Policy::always())),
            EstimandKind::FnaLowerPolicy { pi0, pi1 } | EstimandKind::FnaUpperPolicy { pi0, pi1 } => {
                Some((pi0.clone(), pi1.clone()))
            }
            _ => None,
        }
    }
}

impl fmt::Debug for EstimandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimandKind::FnaLowerPolicy { pi0, pi1 } | EstimandKind::FnaUpperPolicy { pi0, pi1 } => {
                write!(f, "{}({pi0:?} -> {pi1:?})", self.cli_name())
            }
            EstimandKind::CvarIte { alpha } => write!(f, "cvar-ite(alpha={alpha})"),
            _ => f.write_str(self.cli_name()),
        }
    }
}

/// AHE encoding of an estimand.
///
/// The policy upper bound uses `g0 = (pi1(1-pi0), pi0(1-pi1), 0)` and
/// `g1 = (-s, -s, s)` with `s = (pi1 - pi0)^2`, which expands to the upper
/// bound integrand above on every covariate value.
pub fn build_spec(kind: &EstimandKind) -> Result<AheSpec> {
    let zero = constant_coefficients([0.0, 0.0, 0.0]);
    Ok(match kind {
        EstimandKind::FnaLower => AheSpec::new("fna-lower", zero).with_hinge(
            Sign::Minus,
            constant_coefficients([-1.0, 1.0, 0.0]),
            EtaRole::Cate,
        ),
        EstimandKind::FnaUpper => AheSpec::new("fna-upper", constant_coefficients([1.0, 0.0, 0.0])).with_hinge(
            Sign::Plus,
            constant_coefficients([-1.0, -1.0, 1.0]),
            EtaRole::Cats,
        ),
        EstimandKind::FnaLowerPolicy { pi0, pi1 } => {
            let ind = policy_indicator_functions(pi0, pi1);
            AheSpec::new("fna-lower-policy", zero).with_hinge(
                Sign::Minus,
                Arc::new(move |x| ind.lower_hinge(x)),
                EtaRole::Cate,
            )
        }
        EstimandKind::FnaUpperPolicy { pi0, pi1 } => {
            let ind = policy_indicator_functions(pi0, pi1);
            let base = ind.clone();
            AheSpec::new("fna-upper-policy", Arc::new(move |x| base.upper_base(x))).with_hinge(
                Sign::Plus,
                Arc::new(move |x| ind.upper_hinge(x)),
                EtaRole::Cats,
            )
        }
        EstimandKind::FnaUpperOptimal => AheSpec::new("fna-upper-optimal", constant_coefficients([1.0, 0.0, 0.0]))
            .with_hinge(Sign::Plus, constant_coefficients([-1.0, 1.0, 0.0]), EtaRole::Cate)
            .with_hinge(Sign::Plus, constant_coefficients([-1.0, -1.0, 1.0]), EtaRole::Cats),
        EstimandKind::CvarIte { .. } => {
            return Err(Error::Unsupported(
                "cvar-ite is composed from fna and ate estimates and has no single AHE encoding".into(),
            ))
        }
    })
}

/// Average treatment effect as an AHE with no hinges.
pub fn ate_spec() -> AheSpec {
    AheSpec::new("ate", constant_coefficients([-1.0, 1.0, 0.0]))
}

/// Per-covariate lower and upper bound integrands.
pub fn bound_terms(pi0: f64, pi1: f64, mu0: f64, mu1: f64) -> (f64, f64) {
    let lo = ((pi0 - pi1) * (mu1 - mu0)).max(0.0);
    let switch_on = pi1 * (1.0 - pi0);
    let switch_off = pi0 * (1.0 - pi1);
    let hi = (switch_on * mu0 + switch_off * (1.0 - mu0)).min(switch_on * (1.0 - mu1) + switch_off * mu1);
    (lo, hi)
}

fn check_mu(mu0: f64, mu1: f64) -> Result<()> {
    if (0.0..=1.0).contains(&mu0) && (0.0..=1.0).contains(&mu1) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("outcome means ({mu0}, {mu1}) outside [0,1]")))
    }
}

/// Closed-form sharp bounds on the fraction harmed by switching `pi0 -> pi1`.
pub fn sharp_bounds_exact(mu: &dyn Fn(&[f64], Arm) -> f64, law: &AtomLaw, pi0: &Policy, pi1: &Policy) -> Result<Interval> {
    let (mut lo, mut hi) = (0.0, 0.0);
    for atom in law.atoms() {
        let (m0, m1) = (mu(&atom.x, Arm::Control), mu(&atom.x, Arm::Treated));
        check_mu(m0, m1)?;
        let (l, h) = bound_terms(pi0.indicator(&atom.x), pi1.indicator(&atom.x), m0, m1);
        lo += atom.prob * l;
        hi += atom.prob * h;
    }
    Interval::new(lo, hi)
}

/// Bounds for switching from `1 - pi*` to the optimal policy `pi*`:
/// `[0, E[min{mu0, 1-mu0, mu1, 1-mu1}]]`.
pub fn sharp_bounds_optimal(mu: &dyn Fn(&[f64], Arm) -> f64, law: &AtomLaw) -> Result<Interval> {
    let mut hi = 0.0;
    for atom in law.atoms() {
        let (m0, m1) = (mu(&atom.x, Arm::Control), mu(&atom.x, Arm::Treated));
        check_mu(m0, m1)?;
        hi += atom.prob * m0.min(1.0 - m0).min(m1).min(1.0 - m1);
    }
    Interval::new(0.0, hi)
}

/// Whether the fraction harmed is point identified: on every atom with
/// positive mass the policies agree or one arm's outcome is deterministic.
/// Cross-checked against the width of [`sharp_bounds_exact`].
pub fn is_identifiable(mu: &dyn Fn(&[f64], Arm) -> f64, law: &AtomLaw, pi0: &Policy, pi1: &Policy) -> Result<bool> {
    let degenerate = |m: f64| m == 0.0 || m == 1.0;
    let mut by_clauses = true;
    for atom in law.atoms().iter().filter(|a| a.prob > 0.0) {
        let (m0, m1) = (mu(&atom.x, Arm::Control), mu(&atom.x, Arm::Treated));
        check_mu(m0, m1)?;
        let agree = pi0.assign(&atom.x) == pi1.assign(&atom.x);
        if !(agree || degenerate(m0) || degenerate(m1)) {
            by_clauses = false;
        }
    }
    let by_width = sharp_bounds_exact(mu, law, pi0, pi1)?.width() <= 1e-12;
    if by_clauses != by_width {
        return Err(Error::Invariant(format!(
            "identifiability clauses ({by_clauses}) disagree with bound width ({by_width})"
        )));
    }
    Ok(by_clauses)
}

/// `CVaR_alpha(ITE)` of a binary-outcome population with fraction harmed `f`
/// and average effect `ate`: `max{-1, -f/alpha, 1 - (1 - ate)/alpha}`.
pub fn cvar_from_fna(f: f64, ate: f64, alpha: f64) -> f64 {
    (-1.0f64).max(-f / alpha).max(1.0 - (1.0 - ate) / alpha)
}

/// Sharp CVaR interval from the fraction-harmed interval and the ATE.
///
/// `(f, ate)` is feasible iff `max{0, -ate} <= f <= (1 - ate)/2`; both
/// endpoints of `fna` are checked with a 1e-9 slack.
pub fn cvar_ite_bounds(fna: Interval, ate: f64, alpha: f64) -> Result<Interval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} must lie in (0,1)")));
    }
    if !(-1.0..=1.0).contains(&ate) {
        return Err(Error::InvalidInput(format!("ate {ate} outside [-1,1]")));
    }
    const SLACK: f64 = 1e-9;
    let (lo_min, hi_max) = (0f64.max(-ate), (1.0 - ate) / 2.0);
    if fna.lo < lo_min - SLACK || fna.hi > hi_max + SLACK || fna.lo < -SLACK || fna.hi > 1.0 + SLACK {
        return Err(Error::InvalidInput(format!(
            "fraction harmed {fna} is infeasible with ate {ate}: need values in [{lo_min}, {hi_max}]"
        )));
    }
    let lo = cvar_from_fna(fna.hi, ate, alpha).clamp(-1.0, 1.0);
    let hi = cvar_from_fna(fna.lo, ate, alpha).clamp(-1.0, 1.0);
    Interval::new(lo, hi)
}

/// `pi*(x) = 1[tau(x) > 0]`; ties go to arm 0.
pub fn optimal_policy_from(tau: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Policy {
    Policy::sign_of(tau)
}
