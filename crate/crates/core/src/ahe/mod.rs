//! The orthogonal score of an AHE and the cross-fitted estimator built on it.

mod population;

pub use population::{population_ahe, population_phi_mean, Atom, AtomLaw};

use serde::{Deserialize, Serialize};

use crate::data::{Arm, ObservationTable};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::folds::fold_assign;
use crate::nuisance::{fit_bundle, LearnerConfig, NuisanceBundle, PropensityModel};
use crate::spec::{AheSpec, Interval};
use crate::stats::{normal_quantile, pairwise_sum};

/// Score `phi(x, a, y)` of `spec` under the nuisances in `bundle`.
pub fn phi_score(x: &[f64], a: Arm, y: u8, bundle: &NuisanceBundle, spec: &AheSpec) -> Result<f64> {
    phi_with_propensity(x, a, y, bundle.e_hat(x), bundle, spec)
}

/// Score with an explicit propensity value, used when the propensity of a
/// row is known rather than predicted.
pub fn phi_with_propensity(x: &[f64], a: Arm, y: u8, e: f64, bundle: &NuisanceBundle, spec: &AheSpec) -> Result<f64> {
    if bundle.eta.len() != spec.m() {
        return Err(Error::Invariant(format!(
            "bundle carries {} hinge nuisances, spec needs {}",
            bundle.eta.len(),
            spec.m()
        )));
    }
    if !(e >= bundle.floor && e <= 1.0 - bundle.floor) {
        return Err(Error::Invariant(format!("propensity {e} outside [{}, {}]", bundle.floor, 1.0 - bundle.floor)));
    }
    // Coefficients with the active hinges folded in; ties at eta = 0 fire the hinge.
    let mut w = spec.base(x);
    for (l, hinge) in spec.hinges().iter().enumerate() {
        if bundle.eta_hat(l, x) <= 0.0 {
            let g = (hinge.coefficients)(x);
            let s = hinge.sign.value();
            for k in 0..3 {
                w[k] += s * g[k];
            }
        }
    }
    let (a, y) = (a.as_f64(), y as f64);
    let mut phi = w[2];
    if w[0] != 0.0 {
        let mu0 = bundle.mu_hat(x, Arm::Control);
        phi += w[0] * ((a - e) * mu0 + (1.0 - a) * y) / (1.0 - e);
    }
    if w[1] != 0.0 {
        let mu1 = bundle.mu_hat(x, Arm::Treated);
        phi += w[1] * ((e - a) * mu1 + a * y) / e;
    }
    Ok(phi)
}

/// Options for [`estimate`].
#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    /// Number of cross-fitting folds `K`.
    pub folds: usize,
    /// Confidence level of the reported interval.
    pub ci_level: f64,
    /// Shuffle rows (with the learner seed) before fold assignment.
    pub shuffle: bool,
    pub execution: Execution,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self { folds: 5, ci_level: 0.95, shuffle: false, execution: Execution::default() }
    }
}

/// Output of the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimand: String,
    pub point: f64,
    pub se: f64,
    pub ci_level: f64,
    #[serde(with = "interval_pair")]
    pub ci: Interval,
    pub n: usize,
    pub folds: usize,
    pub seed: u64,
    pub learners: Option<LearnerConfig>,
    /// Mean score in each evaluation fold.
    pub per_fold: Vec<f64>,
}

impl EstimateReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {:.6} (se {:.6}), {:.0}% CI {} on n={} with K={}",
            self.estimand,
            self.point,
            self.se,
            100.0 * self.ci_level,
            self.ci,
            self.n,
            self.folds
        )
    }
}

mod interval_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::spec::Interval;

    pub fn serialize<S: Serializer>(ci: &Interval, s: S) -> Result<S::Ok, S::Error> {
        [ci.lo, ci.hi].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Interval, D::Error> {
        let [lo, hi] = <[f64; 2]>::deserialize(d)?;
        Interval::new(lo, hi).map_err(serde::de::Error::custom)
    }
}

/// Sample mean, standard error and normal CI of a vector of scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSummary {
    pub point: f64,
    pub se: f64,
    pub ci: Interval,
}

/// `point = mean(phi)`, `se = sqrt(sum (phi - point)^2 / (n (n-1)))`,
/// `ci = point ± z se` with `z` the `(1 + level)/2` normal quantile.
pub fn summarize_scores(phi: &[f64], ci_level: f64) -> Result<MeanSummary> {
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::InvalidConfig(format!("CI level {ci_level} must lie in (0,1)")));
    }
    let n = phi.len();
    if n < 2 {
        return Err(Error::InvalidInput("at least two scores are needed for a standard error".into()));
    }
    let point = pairwise_sum(phi) / n as f64;
    let sq: Vec<f64> = phi.iter().map(|v| (v - point) * (v - point)).collect();
    let se = (pairwise_sum(&sq) / (n as f64 * (n as f64 - 1.0))).sqrt();
    let z = normal_quantile((1.0 + ci_level) / 2.0);
    Ok(MeanSummary { point, se, ci: Interval::new(point - z * se, point + z * se)? })
}

/// Per-row cross-fitted values: the score and the plug-in integrand.
#[derive(Debug, Clone)]
pub struct CrossFit {
    pub phi: Vec<f64>,
    pub plugin: Vec<f64>,
    pub fold_of: Vec<usize>,
    pub folds: usize,
}

/// Fits nuisances on the complement of each fold and evaluates the score and
/// the plug-in integrand on the fold's rows.
pub fn cross_fit(data: &ObservationTable, spec: &AheSpec, cfg: &LearnerConfig, opts: &EstimateOptions) -> Result<CrossFit> {
    cfg.validate()?;
    let n = data.len();
    let k = opts.folds;
    if k < 2 {
        return Err(Error::InvalidConfig(format!("cross-fitting needs at least 2 folds, got {k}")));
    }
    if n < 2 * k {
        return Err(Error::InvalidConfig(format!("n = {n} is smaller than 2K = {}", 2 * k)));
    }
    if cfg.propensity == PropensityModel::Known && !data.has_known_propensity() {
        return Err(Error::InvalidConfig("known propensity requested but the data has no e column".into()));
    }
    let folds = fold_assign(n, k, opts.shuffle.then_some(cfg.seed))?;
    let use_known = cfg.propensity == PropensityModel::Known;

    let per_fold = opts.execution.try_map(k, |f| -> Result<Vec<(usize, f64, f64)>> {
        let rows = folds.fold(f);
        let train = data.subset(&folds.complement(f))?;
        let bundle = fit_bundle(&train, spec, cfg)?;
        rows.iter()
            .map(|&i| {
                let x = data.x(i);
                let e = if use_known {
                    data.known_propensity(i).unwrap().clamp(cfg.clip_floor, 1.0 - cfg.clip_floor)
                } else {
                    bundle.e_hat(x)
                };
                let phi = phi_with_propensity(x, data.arm(i), data.outcome(i), e, &bundle, spec)?;
                let plugin = spec.integrand(x, bundle.mu_hat(x, Arm::Control), bundle.mu_hat(x, Arm::Treated));
                Ok((i, phi, plugin))
            })
            .collect()
    })?;

    let mut phi = vec![0.0; n];
    let mut plugin = vec![0.0; n];
    let mut fold_of = vec![0; n];
    for (f, values) in per_fold.into_iter().enumerate() {
        for (i, p, q) in values {
            phi[i] = p;
            plugin[i] = q;
            fold_of[i] = f;
        }
    }
    Ok(CrossFit { phi, plugin, fold_of, folds: k })
}

impl CrossFit {
    fn fold_means(&self, values: &[f64]) -> Vec<f64> {
        (0..self.folds)
            .map(|f| {
                let v: Vec<f64> = values.iter().zip(&self.fold_of).filter(|(_, &g)| g == f).map(|(v, _)| *v).collect();
                pairwise_sum(&v) / v.len() as f64
            })
            .collect()
    }

    pub fn report(&self, spec: &AheSpec, cfg: &LearnerConfig, ci_level: f64) -> Result<EstimateReport> {
        let s = summarize_scores(&self.phi, ci_level)?;
        Ok(EstimateReport {
            estimand: spec.name().to_string(),
            point: s.point,
            se: s.se,
            ci_level,
            ci: s.ci,
            n: self.phi.len(),
            folds: self.folds,
            seed: cfg.seed,
            learners: Some(cfg.clone()),
            per_fold: self.fold_means(&self.phi),
        })
    }

    /// The cross-fitted plug-in comparator: the sample mean of the AHE
    /// integrand with `mu_hat` substituted, with a naive standard error.
    pub fn plugin_summary(&self, ci_level: f64) -> Result<MeanSummary> {
        summarize_scores(&self.plugin, ci_level)
    }
}

/// Cross-fitted point estimate, standard error and confidence interval.
pub fn estimate(data: &ObservationTable, spec: &AheSpec, cfg: &LearnerConfig, opts: &EstimateOptions) -> Result<EstimateReport> {
    cross_fit(data, spec, cfg, opts)?.report(spec, cfg, opts.ci_level)
}

/// Estimate with fixed nuisances and no cross-fitting: the plain sample mean
/// of the score.
pub fn estimate_fixed(data: &ObservationTable, spec: &AheSpec, bundle: &NuisanceBundle, ci_level: f64) -> Result<EstimateReport> {
    let phi = (0..data.len())
        .map(|i| phi_score(data.x(i), data.arm(i), data.outcome(i), bundle, spec))
        .collect::<Result<Vec<f64>>>()?;
    let s = summarize_scores(&phi, ci_level)?;
    Ok(EstimateReport {
        estimand: spec.name().to_string(),
        point: s.point,
        se: s.se,
        ci_level,
        ci: s.ci,
        n: data.len(),
        folds: 1,
        seed: 0,
        learners: None,
        per_fold: vec![s.point],
    })
}
