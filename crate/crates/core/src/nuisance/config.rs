//! Learner selection and hyperparameters.
//!
//! The configuration file is TOML with the keys below; every key is optional.
//!
//! ```toml
//! propensity = "known"          # known | constant | logistic | boosted-stumps | k-nearest-mean | partition
//! propensity_constant = 0.5     # used when propensity = "constant"
//! outcome = "partition"         # constant | logistic | boosted-stumps | k-nearest-mean | partition
//! effect = "partition"          # learner for the pseudo-outcome regression; defaults to `outcome`
//! eta_mode = "dr-pseudo-outcome" # plugin | dr-pseudo-outcome
//! clip_floor = 0.01
//! learning_rate = 0.1
//! rounds = 200
//! k = 25                        # omit for ceil(sqrt(n))
//! ridge = 1e-6
//! max_iter = 200
//! grad_tol = 1e-8
//! partition_bins = 2
//! partition_cuts = "quantile"   # quantile | zero
//! partition_prior = 1.0
//! seed = 0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A supervised learner usable for binary classification and for real-valued regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Learner {
    /// Training mean.
    Constant,
    /// Logistic regression for labels, ridge least squares for real targets.
    Logistic,
    /// Gradient-boosted depth-1 trees.
    BoostedStumps,
    /// Mean of the k nearest training rows.
    KNearestMean,
    /// Cell means over a tensor-product partition of the covariates.
    Partition,
}

impl Learner {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "constant" => Learner::Constant,
            "logistic" => Learner::Logistic,
            "boosted-stumps" => Learner::BoostedStumps,
            "k-nearest-mean" => Learner::KNearestMean,
            "partition" => Learner::Partition,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropensityModel {
    /// Use the table's `e` column.
    Known,
    /// `propensity_constant` everywhere.
    Constant,
    Logistic,
    BoostedStumps,
    KNearestMean,
    Partition,
}

impl PropensityModel {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "known" => PropensityModel::Known,
            "constant" => PropensityModel::Constant,
            other => match Learner::parse(other)? {
                Learner::Constant => return None,
                Learner::Logistic => PropensityModel::Logistic,
                Learner::BoostedStumps => PropensityModel::BoostedStumps,
                Learner::KNearestMean => PropensityModel::KNearestMean,
                Learner::Partition => PropensityModel::Partition,
            },
        })
    }

    pub fn learner(self) -> Option<Learner> {
        match self {
            PropensityModel::Known | PropensityModel::Constant => None,
            PropensityModel::Logistic => Some(Learner::Logistic),
            PropensityModel::BoostedStumps => Some(Learner::BoostedStumps),
            PropensityModel::KNearestMean => Some(Learner::KNearestMean),
            PropensityModel::Partition => Some(Learner::Partition),
        }
    }
}

/// How the hinge nuisances are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaMode {
    /// Plug the outcome model into each hinge's linear form.
    Plugin,
    /// Learn the CATE / CATS by regressing doubly robust pseudo-outcomes.
    DrPseudoOutcome,
}

impl EtaMode {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "plugin" => Some(EtaMode::Plugin),
            "dr-pseudo-outcome" | "dr" => Some(EtaMode::DrPseudoOutcome),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionCuts {
    /// Empirical quantiles of each covariate.
    Quantile,
    /// A single cut at zero per covariate (sign pattern of centred covariates).
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub propensity: PropensityModel,
    pub propensity_constant: f64,
    pub outcome: Learner,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect: Option<Learner>,
    pub eta_mode: EtaMode,
    pub clip_floor: f64,
    pub learning_rate: f64,
    pub rounds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub ridge: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub partition_bins: usize,
    pub partition_cuts: PartitionCuts,
    pub partition_prior: f64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            propensity: PropensityModel::Logistic,
            propensity_constant: 0.5,
            outcome: Learner::Logistic,
            effect: None,
            eta_mode: EtaMode::DrPseudoOutcome,
            clip_floor: 0.01,
            learning_rate: 0.1,
            rounds: 200,
            k: None,
            ridge: 1e-6,
            max_iter: 200,
            grad_tol: 1e-8,
            partition_bins: 2,
            partition_cuts: PartitionCuts::Quantile,
            partition_prior: 1.0,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    /// Learner used for pseudo-outcome regressions.
    pub fn effect_learner(&self) -> Learner {
        self.effect.unwrap_or(self.outcome)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.clip_floor > 0.0 && self.clip_floor < 0.5) {
            return bad(format!("clip_floor {} must lie in (0, 0.5)", self.clip_floor));
        }
        if !(self.propensity_constant > 0.0 && self.propensity_constant < 1.0) {
            return bad(format!("propensity_constant {} must lie in (0, 1)", self.propensity_constant));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} must lie in (0, 1]", self.learning_rate));
        }
        if self.rounds == 0 || self.max_iter == 0 {
            return bad("rounds and max_iter must be positive".into());
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad(format!("ridge {} must be a nonnegative number", self.ridge));
        }
        if !(self.grad_tol > 0.0) {
            return bad(format!("grad_tol {} must be positive", self.grad_tol));
        }
        if self.k == Some(0) {
            return bad("k must be positive".into());
        }
        if !(2..=255).contains(&self.partition_bins) {
            return bad(format!("partition_bins {} must lie in [2, 255]", self.partition_bins));
        }
        if !(self.partition_prior > 0.0 && self.partition_prior.is_finite()) {
            return bad(format!("partition_prior {} must be positive", self.partition_prior));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("learner config is always representable in TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = LearnerConfig {
            propensity: PropensityModel::Known,
            outcome: Learner::KNearestMean,
            effect: Some(Learner::Partition),
            k: Some(9),
            seed: 42,
            ..LearnerConfig::default()
        };
        let back = LearnerConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = LearnerConfig::from_toml_str("outcome = \"boosted-stumps\"\nrounds = 50\n").unwrap();
        assert_eq!(cfg.outcome, Learner::BoostedStumps);
        assert_eq!(cfg.rounds, 50);
        assert_eq!(cfg.clip_floor, 0.01);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        assert!(LearnerConfig::from_toml_str("colour = 1").is_err());
        assert!(LearnerConfig::from_toml_str("clip_floor = 0.7").is_err());
        assert!(LearnerConfig::from_toml_str("learning_rate = 0").is_err());
        assert!(LearnerConfig::from_toml_str("k = 0").is_err());
    }

    #[test]
    fn names_parse() {
        assert_eq!(PropensityModel::parse("known"), Some(PropensityModel::Known));
        assert_eq!(PropensityModel::parse("boosted-stumps"), Some(PropensityModel::BoostedStumps));
        assert_eq!(Learner::parse("k-nearest-mean"), Some(Learner::KNearestMean));
        assert_eq!(EtaMode::parse("plugin"), Some(EtaMode::Plugin));
        assert_eq!(Learner::parse("forest"), None);
    }
}
