//! Brute-force search over joint laws of `(Y(0), Y(1))`.
//!
//! Given margins `mu0 = P(Y(0)=1)` and `mu1 = P(Y(1)=1)` at an atom, every
//! coupling is pinned down by `q = P(Y(0)=1, Y(1)=0)` in
//! `[max{0, mu0 - mu1}, min{mu0, 1 - mu1}]`. The search sweeps `q` over a
//! grid and never consults the closed-form bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ahe::{Atom, AtomLaw};
use crate::data::Arm;
use crate::error::{Error, Result};
use crate::estimands::{is_identifiable, sharp_bounds_exact};
use crate::policy::Policy;
use crate::spec::Interval;

pub const DEFAULT_GRID: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingAtom {
    pub x: Vec<f64>,
    pub mu0: f64,
    pub mu1: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingInstance {
    atoms: Vec<CouplingAtom>,
    h: f64,
}

/// Cell probabilities `P(Y(0)=i, Y(1)=j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLaw {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl JointLaw {
    pub fn from_q(mu0: f64, mu1: f64, q: f64) -> Self {
        Self { p10: q, p11: mu0 - q, p01: mu1 - mu0 + q, p00: 1.0 - mu1 - q }
    }

    /// Nonnegative cells summing to one with the given margins.
    pub fn is_valid(&self, mu0: f64, mu1: f64) -> bool {
        const TOL: f64 = 1e-12;
        let cells = [self.p00, self.p01, self.p10, self.p11];
        cells.iter().all(|&c| c >= -TOL)
            && (cells.iter().sum::<f64>() - 1.0).abs() <= TOL
            && (self.p10 + self.p11 - mu0).abs() <= TOL
            && (self.p01 + self.p11 - mu1).abs() <= TOL
    }

    /// `P(Y(a)=1, Y(b)=0)`.
    pub fn harmed(&self, a: Arm, b: Arm) -> f64 {
        match (a, b) {
            (Arm::Control, Arm::Treated) => self.p10,
            (Arm::Treated, Arm::Control) => self.p01,
            _ => 0.0,
        }
    }
}

impl CouplingInstance {
    pub fn new(atoms: Vec<CouplingAtom>, h: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1e-3) {
            return Err(Error::InvalidConfig(format!("grid resolution {h} must lie in (0, 1e-3]")));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidInput("coupling instance needs at least one atom".into()));
        }
        for a in &atoms {
            if !(0.0..=1.0).contains(&a.mu0) || !(0.0..=1.0).contains(&a.mu1) {
                return Err(Error::InvalidInput(format!("outcome means ({}, {}) outside [0,1]", a.mu0, a.mu1)));
            }
            if !(a.prob >= 0.0) {
                return Err(Error::InvalidInput(format!("atom probability {} is negative", a.prob)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("atom probabilities sum to {total}, not 1")));
        }
        Ok(Self { atoms, h })
    }

    /// Evaluates `mu` on the atoms of `law`.
    pub fn from_law(mu: &dyn Fn(&[f64], Arm) -> f64, law: &AtomLaw, h: f64) -> Result<Self> {
        let atoms = law
            .atoms()
            .iter()
            .map(|a| CouplingAtom { x: a.x.clone(), mu0: mu(&a.x, Arm::Control), mu1: mu(&a.x, Arm::Treated), prob: a.prob })
            .collect();
        Self::new(atoms, h)
    }

    pub fn atoms(&self) -> &[CouplingAtom] {
        &self.atoms
    }

    pub fn h(&self) -> f64 {
        self.h
    }
}

/// Grid values `j * h` inside `[lo, hi]`; the single point `lo` if none fall inside.
fn grid(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let first = (lo / h).floor() as i64;
    let last = (hi / h).ceil() as i64;
    let pts: Vec<f64> = (first..=last).map(|j| j as f64 * h).filter(|&q| q >= lo && q <= hi).collect();
    if pts.is_empty() {
        vec![lo]
    } else {
        pts
    }
}

/// Range of the fraction harmed by switching `pi0 -> pi1` over all couplings
/// on the grid. Per-atom extremes are combined because the objective is a
/// probability-weighted sum over atoms.
pub fn coupling_bounds_bruteforce(inst: &CouplingInstance, pi0: &Policy, pi1: &Policy) -> Result<Interval> {
    let (mut lo, mut hi) = (0.0, 0.0);
    for atom in &inst.atoms {
        let (a0, a1) = (pi0.assign(&atom.x), pi1.assign(&atom.x));
        let q_lo = (atom.mu0 - atom.mu1).max(0.0);
        let q_hi = atom.mu0.min(1.0 - atom.mu1);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for q in grid(q_lo, q_hi, inst.h) {
            let joint = JointLaw::from_q(atom.mu0, atom.mu1, q);
            if !joint.is_valid(atom.mu0, atom.mu1) {
                return Err(Error::Invariant(format!("invalid coupling {joint:?} at q = {q}")));
            }
            let v = joint.harmed(a0, a1);
            min = min.min(v);
            max = max.max(v);
        }
        lo += atom.prob * min;
        hi += atom.prob * max;
    }
    Interval::new(lo, hi)
}

/// One row of an agreement run between the closed form and the search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub instance: usize,
    pub atoms: usize,
    pub closed_lo: f64,
    pub closed_hi: f64,
    pub brute_lo: f64,
    pub brute_hi: f64,
    pub discrepancy: f64,
    pub identifiable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub h: f64,
    pub max_discrepancy: f64,
    /// Instances where `is_identifiable` disagrees with a search width `<= h`.
    pub identifiability_mismatches: usize,
    pub rows: Vec<AgreementRow>,
}

impl AgreementReport {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn random_policy(rng: &mut ChaCha8Rng) -> Policy {
    match rng.random_range(0..3) {
        0 => Policy::never(),
        1 => Policy::always(),
        _ => Policy::Threshold { column: 0, cutoff: rng.random_range(-1.0..1.0) },
    }
}

/// A random finite population on `x in [-1, 1]` with up to `max_atoms`
/// atoms, outcome means occasionally pinned to 0 or 1, and a random pair of
/// constant or threshold policies.
pub fn random_case(rng: &mut ChaCha8Rng, max_atoms: usize) -> (AtomLaw, Vec<[f64; 2]>, Policy, Policy) {
    let k = rng.random_range(1..=max_atoms.max(1));
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut probs: Vec<f64> = w.iter().map(|v| v / total).collect();
    let head: f64 = probs[..k - 1].iter().sum();
    probs[k - 1] = 1.0 - head;
    let atoms = probs.into_iter().map(|prob| Atom { x: vec![rng.random_range(-1.0..1.0)], prob }).collect();
    let mut draw_mu = || match rng.random_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random::<f64>(),
    };
    let mu = (0..k).map(|_| [draw_mu(), draw_mu()]).collect();
    let pi0 = random_policy(rng);
    let pi1 = if rng.random_range(0..5) == 0 { pi0.clone() } else { random_policy(rng) };
    (AtomLaw::new(atoms).expect("normalized masses"), mu, pi0, pi1)
}

/// Compares closed-form and searched bounds on `count` seeded random instances.
pub fn oracle_agreement(seed: u64, count: usize, max_atoms: usize, h: f64) -> Result<AgreementReport> {
    if count == 0 || max_atoms == 0 {
        return Err(Error::InvalidConfig("need at least one instance and one atom".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count);
    let mut mismatches = 0;
    for instance in 0..count {
        let (law, mu, pi0, pi1) = random_case(&mut rng, max_atoms);
        let lookup = |x: &[f64], a: Arm| {
            let i = law.atoms().iter().position(|atom| atom.x[0] == x[0]).expect("atom");
            mu[i][a.index()]
        };
        let closed = sharp_bounds_exact(&lookup, &law, &pi0, &pi1)?;
        let brute = coupling_bounds_bruteforce(&CouplingInstance::from_law(&lookup, &law, h)?, &pi0, &pi1)?;
        let identifiable = is_identifiable(&lookup, &law, &pi0, &pi1)?;
        mismatches += usize::from(identifiable != (brute.width() <= h));
        rows.push(AgreementRow {
            instance,
            atoms: law.atoms().len(),
            closed_lo: closed.lo,
            closed_hi: closed.hi,
            brute_lo: brute.lo,
            brute_hi: brute.hi,
            discrepancy: (closed.lo - brute.lo).abs().max((closed.hi - brute.hi).abs()),
            identifiable,
        });
    }
    let max_discrepancy = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    Ok(AgreementReport { h, max_discrepancy, identifiability_mismatches: mismatches, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(mu0: f64, mu1: f64) -> CouplingInstance {
        CouplingInstance::new(vec![CouplingAtom { x: vec![0.0], mu0, mu1, prob: 1.0 }], DEFAULT_GRID).unwrap()
    }

    #[test]
    fn wholesale_single_atom() {
        let b = coupling_bounds_bruteforce(&single(0.7, 0.4), &Policy::never(), &Policy::always()).unwrap();
        assert!((b.lo - 0.3).abs() <= 1e-4 && (b.hi - 0.6).abs() <= 1e-4, "{b}");
    }

    #[test]
    fn reverse_switch_single_atom() {
        let b = coupling_bounds_bruteforce(&single(0.7, 0.4), &Policy::always(), &Policy::never()).unwrap();
        assert!(b.lo.abs() <= 1e-4 && (b.hi - 0.3).abs() <= 1e-4, "{b}");
    }

    #[test]
    fn equal_policies_give_zero() {
        let p = Policy::Threshold { column: 0, cutoff: 0.0 };
        let b = coupling_bounds_bruteforce(&single(0.5, 0.5), &p, &p).unwrap();
        assert_eq!((b.lo, b.hi), (0.0, 0.0));
    }

    #[test]
    fn cells_are_valid_across_range() {
        for (mu0, mu1) in [(0.0f64, 0.0f64), (1.0, 1.0), (0.3, 0.9), (0.9, 0.3), (0.5, 0.5)] {
            let lo = (mu0 - mu1).max(0.0);
            let hi = f64::min(mu0, 1.0 - mu1);
            for q in grid(lo, hi, 1e-3) {
                assert!(JointLaw::from_q(mu0, mu1, q).is_valid(mu0, mu1));
            }
        }
    }

    #[test]
    fn agreement_over_random_instances() {
        let report = oracle_agreement(3, 50, 5, DEFAULT_GRID).unwrap();
        assert_eq!(report.rows.len(), 50);
        assert!(report.max_discrepancy <= DEFAULT_GRID);
        assert_eq!(report.identifiability_mismatches, 0);
        assert_eq!(report, oracle_agreement(3, 50, 5, DEFAULT_GRID).unwrap());
    }

    #[test]
    fn rejects_bad_instances() {
        let atom = |mu0| CouplingAtom { x: vec![], mu0, mu1: 0.5, prob: 1.0 };
        assert!(CouplingInstance::new(vec![atom(1.2)], 1e-4).is_err());
        assert!(CouplingInstance::new(vec![atom(0.2)], 0.1).is_err());
    }
}
