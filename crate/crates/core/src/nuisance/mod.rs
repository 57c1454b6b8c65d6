//! Nuisance fitting: propensity `e`, outcome model `mu(x,a)`, CATE `tau`,
//! CATS `sigma`, and the hinge nuisances `eta_l` of an AHE.
//!
//! Every fitted function is an immutable, thread-safe closure. Propensities
//! are clipped into `[floor, 1-floor]`, outcomes into `[0,1]`, CATE into
//! `[-1,1]`, CATS into `[0,2]` and hinge nuisances into `[-3,3]`.
//!
//! Fitted hinge nuisances are not forced to vanish where the true hinge
//! argument vanishes; that support condition is an assumption of the
//! calibration guarantee, not something a fitter can check.

pub mod config;
pub mod learners;

use std::sync::Arc;

use log::warn;

pub use config::{EtaMode, Learner, LearnerConfig, PartitionCuts, PropensityModel};
use learners::{fit, Rows, SharedPredictor, Task};

use crate::data::{Arm, ObservationTable};
use crate::error::{Error, Result};
use crate::spec::{linear_in_mu, AheSpec, EtaRole};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type OutcomeFn = Arc<dyn Fn(&[f64], Arm) -> f64 + Send + Sync>;

/// Fitted nuisances consumed by the score.
#[derive(Clone)]
pub struct NuisanceBundle {
    pub propensity: ScalarFn,
    pub outcome: OutcomeFn,
    pub eta: Vec<ScalarFn>,
    /// Overlap floor the propensity is expected to respect.
    pub floor: f64,
}

impl NuisanceBundle {
    pub fn new(propensity: ScalarFn, outcome: OutcomeFn, eta: Vec<ScalarFn>, floor: f64) -> Self {
        Self { propensity, outcome, eta, floor }
    }

    pub fn e_hat(&self, x: &[f64]) -> f64 {
        (self.propensity)(x)
    }

    pub fn mu_hat(&self, x: &[f64], a: Arm) -> f64 {
        (self.outcome)(x, a)
    }

    pub fn eta_hat(&self, l: usize, x: &[f64]) -> f64 {
        (self.eta[l])(x)
    }
}

impl std::fmt::Debug for NuisanceBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NuisanceBundle").field("m", &self.eta.len()).field("floor", &self.floor).finish()
    }
}

fn labels_of(table: &ObservationTable, pick: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..table.len()).map(pick).collect()
}

/// Fits `e(x) = P(A=1 | X=x)`.
pub fn fit_propensity(train: &ObservationTable, cfg: &LearnerConfig) -> Result<ScalarFn> {
    cfg.validate()?;
    let floor = cfg.clip_floor;
    let clip = move |p: f64| p.clamp(floor, 1.0 - floor);
    match cfg.propensity {
        PropensityModel::Known => {
            if !train.has_known_propensity() {
                return Err(Error::InvalidConfig(
                    "known propensity requested but the table has no e column".into(),
                ));
            }
            // Exact lookup on training rows, nearest training row elsewhere.
            let values = labels_of(train, |i| train.known_propensity(i).unwrap());
            let lookup = learners::NearestMean::fit(Rows::new(train.covariates(), train.dim()), &values, 1);
            Ok(Arc::new(move |x: &[f64]| clip(learners::Predictor::predict(&lookup, x))))
        }
        PropensityModel::Constant => {
            let p = clip(cfg.propensity_constant);
            Ok(Arc::new(move |_: &[f64]| p))
        }
        model => {
            let learner = model.learner().expect("fitted propensity model");
            let labels = labels_of(train, |i| train.arm(i).as_f64());
            if labels.iter().all(|&v| v == labels[0]) {
                warn!("all training rows share one arm; propensity falls back to the clipped empirical mean");
            }
            let fitted = fit(learner, Rows::new(train.covariates(), train.dim()), &labels, Task::Classification, cfg)?;
            Ok(Arc::new(move |x: &[f64]| clip(fitted.predict(x))))
        }
    }
}

/// Fits `mu(x,a) = E[Y | X=x, A=a]`, one binary regression per arm.
pub fn fit_outcome(train: &ObservationTable, cfg: &LearnerConfig) -> Result<OutcomeFn> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot fit an outcome model on an empty table".into()));
    }
    let pooled = crate::stats::mean(&labels_of(train, |i| train.outcome(i) as f64));
    let mut models: Vec<SharedPredictor> = Vec::with_capacity(2);
    for arm in Arm::BOTH {
        let idx = train.arm_indices(arm);
        if idx.is_empty() {
            warn!("no training rows in arm {}; its outcome model is the pooled mean {pooled}", arm.index());
            models.push(Arc::new(learners::ConstantPredictor(pooled)));
            continue;
        }
        let sub = train.subset(&idx)?;
        let labels = labels_of(&sub, |i| sub.outcome(i) as f64);
        models.push(fit(cfg.outcome, Rows::new(sub.covariates(), sub.dim()), &labels, Task::Classification, cfg)?);
    }
    let [m0, m1]: [SharedPredictor; 2] = models.try_into().map_err(|_| Error::Invariant("two arms".into()))?;
    Ok(Arc::new(move |x: &[f64], a: Arm| {
        match a {
            Arm::Control => m0.predict(x),
            Arm::Treated => m1.predict(x),
        }
        .clamp(0.0, 1.0)
    }))
}

/// The doubly robust pseudo-outcome
/// `m1 - m0 + (a - e) / (e (1 - e)) · (y - m_a)`.
pub fn dr_pseudo_outcome(m0: f64, m1: f64, a: Arm, e: f64, y: f64) -> f64 {
    let m_a = match a {
        Arm::Control => m0,
        Arm::Treated => m1,
    };
    m1 - m0 + (a.as_f64() - e) / (e * (1.0 - e)) * (y - m_a)
}

/// Outcomes after the CATS transform `y <- (2a - 1) y`. Under the transform
/// the arm-conditional means become `(-mu(x,0), mu(x,1))`, so their
/// difference is `sigma(x) = mu(x,1) + mu(x,0)`.
pub fn cats_transform(table: &ObservationTable) -> Vec<f64> {
    (0..table.len())
        .map(|i| (2.0 * table.arm(i).as_f64() - 1.0) * table.outcome(i) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EffectTarget {
    Cate,
    Cats,
}

impl EffectTarget {
    fn range(self) -> (f64, f64) {
        match self {
            EffectTarget::Cate => (-1.0, 1.0),
            EffectTarget::Cats => (0.0, 2.0),
        }
    }

    fn plugin(self, mu0: f64, mu1: f64) -> f64 {
        match self {
            EffectTarget::Cate => mu1 - mu0,
            EffectTarget::Cats => mu1 + mu0,
        }
    }
}

/// Fits the CATE `tau(x) = mu(x,1) - mu(x,0)`.
///
/// Plugin mode differences `mu_hat`. Pseudo-outcome mode ignores `mu_hat`:
/// it splits `train` in two by row parity, fits `e` and `mu` on each half,
/// builds pseudo-outcomes on the other half and regresses them on `x` with
/// the configured effect learner.
pub fn fit_cate(train: &ObservationTable, mu_hat: &OutcomeFn, cfg: &LearnerConfig) -> Result<ScalarFn> {
    fit_effect(train, EffectTarget::Cate, mu_hat, cfg)
}

/// Fits the CATS `sigma(x) = mu(x,1) + mu(x,0)` by running the CATE
/// machinery on the transformed outcomes of [`cats_transform`].
pub fn fit_cats(train: &ObservationTable, mu_hat: &OutcomeFn, cfg: &LearnerConfig) -> Result<ScalarFn> {
    fit_effect(train, EffectTarget::Cats, mu_hat, cfg)
}

fn fit_effect(train: &ObservationTable, target: EffectTarget, mu_hat: &OutcomeFn, cfg: &LearnerConfig) -> Result<ScalarFn> {
    cfg.validate()?;
    let (lo, hi) = target.range();
    if cfg.eta_mode == EtaMode::Plugin || train.len() < 4 {
        if cfg.eta_mode != EtaMode::Plugin {
            warn!("too few rows ({}) for nested pseudo-outcome fitting; using the plugin effect", train.len());
        }
        let mu = mu_hat.clone();
        return Ok(Arc::new(move |x: &[f64]| target.plugin(mu(x, Arm::Control), mu(x, Arm::Treated)).clamp(lo, hi)));
    }

    let outcomes: Vec<f64> = match target {
        EffectTarget::Cate => labels_of(train, |i| train.outcome(i) as f64),
        EffectTarget::Cats => cats_transform(train),
    };
    let n = train.len();
    let mut pseudo = vec![0.0; n];
    for half in 0..2 {
        let eval: Vec<usize> = (0..n).filter(|i| i % 2 == half).collect();
        let fit_rows: Vec<usize> = (0..n).filter(|i| i % 2 != half).collect();
        let fit_table = train.subset(&fit_rows)?;
        let mu = fit_outcome(&fit_table, cfg)?;
        let known = cfg.propensity == PropensityModel::Known && train.has_known_propensity();
        let e_fit = if known { None } else { Some(fit_propensity(&fit_table, cfg)?) };
        for &i in &eval {
            let x = train.x(i);
            let e = match &e_fit {
                Some(f) => f(x),
                None => train.known_propensity(i).unwrap().clamp(cfg.clip_floor, 1.0 - cfg.clip_floor),
            };
            let (mut m0, m1) = (mu(x, Arm::Control), mu(x, Arm::Treated));
            if target == EffectTarget::Cats {
                m0 = -m0;
            }
            pseudo[i] = dr_pseudo_outcome(m0, m1, train.arm(i), e, outcomes[i]);
        }
    }
    let regression = fit(cfg.effect_learner(), Rows::new(train.covariates(), train.dim()), &pseudo, Task::Regression, cfg)?;
    Ok(Arc::new(move |x: &[f64]| regression.predict(x).clamp(lo, hi)))
}

/// Fits everything the score of `spec` needs on `train`.
pub fn fit_bundle(train: &ObservationTable, spec: &AheSpec, cfg: &LearnerConfig) -> Result<NuisanceBundle> {
    cfg.validate()?;
    let propensity = fit_propensity(train, cfg)?;
    let outcome = fit_outcome(train, cfg)?;
    let learned = cfg.eta_mode == EtaMode::DrPseudoOutcome;
    let wants = |role| learned && spec.hinges().iter().any(|h| h.role == role);
    let tau = if wants(EtaRole::Cate) { Some(fit_cate(train, &outcome, cfg)?) } else { None };
    let sigma = if wants(EtaRole::Cats) { Some(fit_cats(train, &outcome, cfg)?) } else { None };

    let eta = spec
        .hinges()
        .iter()
        .map(|hinge| -> ScalarFn {
            let g = hinge.coefficients.clone();
            let mu = outcome.clone();
            let learned_effect = match hinge.role {
                EtaRole::Cate => tau.clone().map(|f| (EffectTarget::Cate, f)),
                EtaRole::Cats => sigma.clone().map(|f| (EffectTarget::Cats, f)),
                EtaRole::Custom => None,
            };
            match learned_effect {
                None => Arc::new(move |x: &[f64]| linear_in_mu(g(x), mu(x, Arm::Control), mu(x, Arm::Treated)).clamp(-3.0, 3.0)),
                Some((target, effect)) => Arc::new(move |x: &[f64]| {
                    // g·(mu0, mu1, 1) = (g1 - g0)/2 · tau + (g0 + g1)/2 · sigma + g2
                    let c = g(x);
                    let (m0, m1) = (mu(x, Arm::Control), mu(x, Arm::Treated));
                    let (tau_x, sigma_x) = match target {
                        EffectTarget::Cate => (effect(x), m1 + m0),
                        EffectTarget::Cats => (m1 - m0, effect(x)),
                    };
                    let (dc, sc) = (0.5 * (c[1] - c[0]), 0.5 * (c[0] + c[1]));
                    let mut v = c[2];
                    if dc != 0.0 {
                        v += dc * tau_x;
                    }
                    if sc != 0.0 {
                        v += sc * sigma_x;
                    }
                    v.clamp(-3.0, 3.0)
                }),
            }
        })
        .collect();
    Ok(NuisanceBundle::new(propensity, outcome, eta, cfg.clip_floor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimands::{build_spec, EstimandKind};

    fn table(xs: Vec<f64>, a: Vec<u8>, y: Vec<u8>, e: Option<Vec<f64>>) -> ObservationTable {
        let a = a.into_iter().map(|v| Arm::from_bit(v).unwrap()).collect();
        ObservationTable::new(1, xs, a, y, e).unwrap()
    }

    fn cfg() -> LearnerConfig {
        LearnerConfig::default()
    }

    #[test]
    fn known_propensity_reproduces_column() {
        let t = table(vec![0.0, 1.0, 2.0, 3.0], vec![1, 0, 1, 0], vec![1, 0, 0, 1], Some(vec![0.5, 0.3, 0.7, 0.5]));
        let e = fit_propensity(&t, &LearnerConfig { propensity: PropensityModel::Known, ..cfg() }).unwrap();
        assert_eq!(e(&[1.0]), 0.3);
        assert_eq!(e(&[2.0]), 0.7);
    }

    #[test]
    fn known_propensity_requires_column() {
        let t = table(vec![0.0, 1.0], vec![1, 0], vec![1, 0], None);
        let res = fit_propensity(&t, &LearnerConfig { propensity: PropensityModel::Known, ..cfg() });
        assert!(matches!(res, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn constant_propensity_everywhere() {
        let t = table(vec![0.0, 1.0], vec![1, 0], vec![1, 0], Some(vec![0.5, 0.5]));
        let e = fit_propensity(&t, &LearnerConfig { propensity: PropensityModel::Constant, ..cfg() }).unwrap();
        assert_eq!(e(&[-7.0]), 0.5);
    }

    #[test]
    fn degenerate_arms_clip_to_floor() {
        let t = table(vec![0.0, 1.0, 2.0], vec![1, 1, 1], vec![1, 0, 1], None);
        let e = fit_propensity(&t, &cfg()).unwrap();
        assert_eq!(e(&[0.5]), 0.99);
    }

    #[test]
    fn all_zero_outcomes_give_zero_mu() {
        let t = table((0..20).map(|i| i as f64).collect(), (0..20).map(|i| (i % 2) as u8).collect(), vec![0; 20], None);
        for learner in [Learner::Logistic, Learner::BoostedStumps, Learner::KNearestMean, Learner::Partition] {
            let mu = fit_outcome(&t, &LearnerConfig { outcome: learner, ..cfg() }).unwrap();
            for x in [-3.0, 4.0, 40.0] {
                assert!(mu(&[x], Arm::Control) < 1e-3 && mu(&[x], Arm::Treated) < 1e-3);
            }
        }
    }

    #[test]
    fn separable_arms() {
        let a: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let t = table((0..40).map(|i| i as f64 / 10.0).collect(), a.clone(), a, None);
        let mu = fit_outcome(&t, &cfg()).unwrap();
        assert!(mu(&[1.0], Arm::Treated) > 0.999);
        assert!(mu(&[1.0], Arm::Control) < 0.001);
    }

    #[test]
    fn empty_arm_uses_pooled_mean() {
        let t = table(vec![0.0, 1.0, 2.0, 3.0], vec![1, 1, 1, 1], vec![1, 0, 1, 1], None);
        let mu = fit_outcome(&t, &cfg()).unwrap();
        assert!((mu(&[0.0], Arm::Control) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn pseudo_outcome_direct_evaluation() {
        // 0.4 + (0.5 / 0.25) · 0.4
        let psi = dr_pseudo_outcome(0.2, 0.6, Arm::Treated, 0.5, 1.0);
        assert!((psi - 1.2).abs() < 1e-12);
    }

    #[test]
    fn plugin_effects_from_constant_means() {
        let t = table(vec![0.0, 1.0], vec![1, 0], vec![1, 0], None);
        let mu: OutcomeFn = Arc::new(|_: &[f64], _| 0.5);
        let plugin = LearnerConfig { eta_mode: EtaMode::Plugin, ..cfg() };
        assert_eq!(fit_cate(&t, &mu, &plugin).unwrap()(&[3.0]), 0.0);
        assert_eq!(fit_cats(&t, &mu, &plugin).unwrap()(&[3.0]), 1.0);
    }

    #[test]
    fn cats_of_zero_outcomes_is_zero() {
        let n = 40;
        let t = table((0..n).map(|i| i as f64).collect(), (0..n).map(|i| (i % 3 == 0) as u8).collect(), vec![0; n], None);
        let mu = fit_outcome(&t, &cfg()).unwrap();
        for mode in [EtaMode::Plugin, EtaMode::DrPseudoOutcome] {
            let sigma = fit_cats(&t, &mu, &LearnerConfig { eta_mode: mode, ..cfg() }).unwrap();
            assert!(sigma(&[5.0]).abs() < 1e-3, "{mode:?}");
        }
    }

    #[test]
    fn cats_transform_arm_means() {
        let a: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let t = table((0..10).map(|i| i as f64).collect(), a.clone(), a, None);
        let y = cats_transform(&t);
        let treated: Vec<f64> = (0..10).filter(|i| i % 2 == 1).map(|i| y[i]).collect();
        let control: Vec<f64> = (0..10).filter(|i| i % 2 == 0).map(|i| y[i]).collect();
        assert!(treated.iter().all(|&v| v == 1.0));
        assert!(control.iter().all(|&v| v == 0.0));
        let mu = fit_outcome(&t, &cfg()).unwrap();
        let sigma = fit_cats(&t, &mu, &LearnerConfig { eta_mode: EtaMode::Plugin, ..cfg() }).unwrap();
        assert!((sigma(&[3.0]) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn bundle_role_mapping() {
        let n = 60;
        let t = table(
            (0..n).map(|i| (i as f64 * 0.37).sin()).collect(),
            (0..n).map(|i| (i % 2) as u8).collect(),
            (0..n).map(|i| (i % 3 == 0) as u8).collect(),
            None,
        );
        let c = cfg();
        let lower = fit_bundle(&t, &build_spec(&EstimandKind::FnaLower).unwrap(), &c).unwrap();
        let mu = fit_outcome(&t, &c).unwrap();
        let tau = fit_cate(&t, &mu, &c).unwrap();
        let sigma = fit_cats(&t, &mu, &c).unwrap();
        for x in [-0.9, 0.1, 0.7] {
            assert_eq!(lower.eta_hat(0, &[x]), tau(&[x]));
        }
        let opt = fit_bundle(&t, &build_spec(&EstimandKind::FnaUpperOptimal).unwrap(), &c).unwrap();
        assert_eq!(opt.eta.len(), 2);
        for x in [-0.9, 0.1, 0.7] {
            assert_eq!(opt.eta_hat(0, &[x]), tau(&[x]));
            assert!((opt.eta_hat(1, &[x]) - (1.0 - sigma(&[x]))).abs() < 1e-15);
        }
        let ate = fit_bundle(&t, &crate::estimands::ate_spec(), &c).unwrap();
        assert!(ate.eta.is_empty());
    }
}
