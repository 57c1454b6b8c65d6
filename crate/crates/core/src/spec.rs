//! Average Hinge Effect estimand descriptions and intervals.
//!
//! An AHE is the expectation over `X` of
//!
//! ```text
//! g0·(mu(X,0), mu(X,1), 1) + sum_l rho_l · min{0, eta_l(X)},
//! eta_l(X) = g_l·(mu(X,0), mu(X,1), 1)
//! ```
//!
//! where every coefficient triple `g_l(x)` lies in `[-1,1]^3`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Slack allowed when checking `lo <= hi` on computed bounds.
pub const INTERVAL_TOLERANCE: f64 = 1e-12;

/// Closed interval with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Accepts `lo <= hi + 1e-12` and clamps `lo` down to `hi` when floating
    /// point noise inverted the pair.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Invariant(format!("non-finite interval [{lo}, {hi}]")));
        }
        if lo > hi + INTERVAL_TOLERANCE {
            return Err(Error::Invariant(format!("inverted interval [{lo}, {hi}]")));
        }
        Ok(Self { lo: lo.min(hi), hi })
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.6}, {:.6}]", self.lo, self.hi)
    }
}

/// Sign attached to a hinge term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }
}

/// Which learned function a hinge nuisance is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaRole {
    /// `eta` depends on `mu` only through the CATE `mu(x,1) - mu(x,0)`.
    Cate,
    /// `eta` depends on `mu` only through the CATS `mu(x,1) + mu(x,0)`.
    Cats,
    /// Anything else; always fitted by plugging in the outcome model.
    Custom,
}

/// Coefficient triple `x -> (g^(0)(x), g^(1)(x), g^(2)(x))`.
pub type Coefficients = Arc<dyn Fn(&[f64]) -> [f64; 3] + Send + Sync>;

pub fn constant_coefficients(g: [f64; 3]) -> Coefficients {
    Arc::new(move |_| g)
}

/// Evaluates `g·(mu0, mu1, 1)`.
pub fn linear_in_mu(g: [f64; 3], mu0: f64, mu1: f64) -> f64 {
    g[0] * mu0 + g[1] * mu1 + g[2]
}

/// One AHE estimand: a base triple and `m` signed hinge triples.
#[derive(Clone)]
pub struct AheSpec {
    name: String,
    base: Coefficients,
    hinges: Vec<Hinge>,
}

#[derive(Clone)]
pub struct Hinge {
    pub sign: Sign,
    pub coefficients: Coefficients,
    pub role: EtaRole,
}

impl AheSpec {
    pub fn new(name: impl Into<String>, base: Coefficients) -> Self {
        Self { name: name.into(), base, hinges: Vec::new() }
    }

    pub fn with_hinge(mut self, sign: Sign, coefficients: Coefficients, role: EtaRole) -> Self {
        self.hinges.push(Hinge { sign, coefficients, role });
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of hinge terms `m`.
    pub fn m(&self) -> usize {
        self.hinges.len()
    }

    pub fn hinges(&self) -> &[Hinge] {
        &self.hinges
    }

    pub fn base(&self, x: &[f64]) -> [f64; 3] {
        (self.base)(x)
    }

    pub fn signs(&self) -> Vec<Sign> {
        self.hinges.iter().map(|h| h.sign).collect()
    }

    /// True hinge nuisance `eta_l(x)` for a given outcome model.
    pub fn eta(&self, l: usize, x: &[f64], mu0: f64, mu1: f64) -> f64 {
        linear_in_mu((self.hinges[l].coefficients)(x), mu0, mu1)
    }

    /// The AHE integrand at `x` given `mu(x,0), mu(x,1)`.
    pub fn integrand(&self, x: &[f64], mu0: f64, mu1: f64) -> f64 {
        let mut v = linear_in_mu(self.base(x), mu0, mu1);
        for h in &self.hinges {
            v += h.sign.value() * linear_in_mu((h.coefficients)(x), mu0, mu1).min(0.0);
        }
        v
    }

    /// Checks the coefficient and hinge-range invariants at one covariate
    /// value: every component in `[-1,1]` and every `eta` in `[-3,3]`.
    pub fn check_at(&self, x: &[f64], mu0: f64, mu1: f64) -> Result<()> {
        let in_unit = |g: [f64; 3]| g.iter().all(|c| (-1.0..=1.0).contains(c));
        if !in_unit(self.base(x)) {
            return Err(Error::InvalidInput(format!("{}: base coefficient outside [-1,1]", self.name)));
        }
        for (l, h) in self.hinges.iter().enumerate() {
            let g = (h.coefficients)(x);
            if !in_unit(g) {
                return Err(Error::InvalidInput(format!(
                    "{}: hinge {} coefficient outside [-1,1]",
                    self.name,
                    l + 1
                )));
            }
            let eta = linear_in_mu(g, mu0, mu1);
            if eta.abs() > 3.0 {
                return Err(Error::InvalidInput(format!("{}: eta_{} = {eta} outside [-3,3]", self.name, l + 1)));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for AheSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AheSpec")
            .field("name", &self.name)
            .field("signs", &self.signs())
            .field("roles", &self.hinges.iter().map(|h| h.role).collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_clamps_noise_and_rejects_inversion() {
        let i = Interval::new(0.5 + 1e-13, 0.5).unwrap();
        assert_eq!(i.lo, 0.5);
        assert!(Interval::new(0.6, 0.5).is_err());
        assert!(Interval::new(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn integrand_with_single_hinge() {
        let spec = AheSpec::new("t", constant_coefficients([1.0, 0.0, 0.0])).with_hinge(
            Sign::Plus,
            constant_coefficients([-1.0, -1.0, 1.0]),
            EtaRole::Cats,
        );
        // mu0 + min{0, 1 - mu0 - mu1} = min{mu0, 1 - mu1}
        assert!((spec.integrand(&[0.0], 0.7, 0.4) - 0.6).abs() < 1e-15);
        assert!((spec.integrand(&[0.0], 0.2, 0.4) - 0.2).abs() < 1e-15);
        assert_eq!(spec.m(), 1);
    }

    #[test]
    fn check_at_flags_out_of_range_coefficients() {
        let bad = AheSpec::new("bad", constant_coefficients([1.5, 0.0, 0.0]));
        assert!(bad.check_at(&[0.0], 0.5, 0.5).is_err());
    }
}
