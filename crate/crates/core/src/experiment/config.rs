use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lower_bound::{Algorithm, AlgorithmParams};
use crate::model_classes::{DEFAULT_HIDDEN_DIMS, DEFAULT_TRUNCATION_DIMS};
use crate::selection::HOLDOUT_SPLIT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Realizable tabular family, complexity-coverage selection.
    Cc,
    /// Nested Gaussian truncations, SLOPE and hold-out.
    Ac,
    LowerBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CcSettings {
    pub state_count: usize,
    pub action_count: usize,
    pub hidden_dims: Vec<usize>,
}

impl Default for CcSettings {
    fn default() -> Self {
        Self {
            state_count: 20,
            action_count: 10,
            hidden_dims: DEFAULT_HIDDEN_DIMS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcSettings {
    pub ambient_dim: usize,
    pub true_dim: usize,
    pub action_count: usize,
    pub truncation_dims: Vec<usize>,
    pub holdout_split: f64,
}

impl Default for AcSettings {
    fn default() -> Self {
        Self {
            ambient_dim: 100,
            true_dim: 30,
            action_count: 10,
            truncation_dims: DEFAULT_TRUNCATION_DIMS.to_vec(),
            holdout_split: HOLDOUT_SPLIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LowerBoundSettings {
    pub n1: Vec<usize>,
    pub n2: Vec<usize>,
    pub algorithms: Vec<String>,
}

impl Default for LowerBoundSettings {
    fn default() -> Self {
        Self {
            n1: vec![16, 1024, 65536],
            n2: vec![16],
            algorithms: vec!["cc".into(), "slope".into(), "holdout".into()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default = "defaults::n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "defaults::n_test")]
    pub n_test: usize,
    #[serde(default = "defaults::n_validation")]
    pub n_validation: usize,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::penalty_scale")]
    pub penalty_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cc: CcSettings,
    #[serde(default)]
    pub ac: AcSettings,
    #[serde(default)]
    pub lower_bound: LowerBoundSettings,
}

mod defaults {
    pub fn trials() -> usize {
        20
    }
    pub fn n_grid() -> Vec<usize> {
        vec![100, 250, 500, 1000, 2000, 4000]
    }
    pub fn n_test() -> usize {
        500
    }
    pub fn n_validation() -> usize {
        500
    }
    pub fn delta() -> f64 {
        0.05
    }
    pub fn lambda() -> f64 {
        1.0
    }
    pub fn penalty_scale() -> f64 {
        0.1
    }
}

impl ExperimentConfig {
    /// Defaults for `kind`.
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            experiment: kind,
            trials: defaults::trials(),
            n_grid: defaults::n_grid(),
            n_test: defaults::n_test(),
            n_validation: defaults::n_validation(),
            delta: defaults::delta(),
            lambda: defaults::lambda(),
            penalty_scale: defaults::penalty_scale(),
            seed: 0,
            cc: CcSettings::default(),
            ac: AcSettings::default(),
            lower_bound: LowerBoundSettings::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(Error::config(field, "must be positive"))
            } else {
                Ok(())
            }
        };
        let nonempty_positive = |field: &str, v: &[usize]| {
            if v.is_empty() {
                return Err(Error::config(field, "must not be empty"));
            }
            if v.contains(&0) {
                return Err(Error::config(field, "entries must be positive"));
            }
            Ok(())
        };
        positive("trials", self.trials)?;
        if !(self.delta > 0.0 && self.delta <= (-1.0f64).exp()) {
            return Err(Error::config("delta", format!("{} must lie in (0, 1/e]", self.delta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", "must be finite and nonnegative"));
        }
        if !(self.penalty_scale >= 0.0 && self.penalty_scale.is_finite()) {
            return Err(Error::config("penalty_scale", "must be finite and nonnegative"));
        }
        match self.experiment {
            ExperimentKind::Cc => {
                nonempty_positive("n_grid", &self.n_grid)?;
                positive("n_test", self.n_test)?;
                positive("cc.state_count", self.cc.state_count)?;
                if self.cc.action_count < 2 {
                    return Err(Error::config("cc.action_count", "needs at least two actions"));
                }
                nonempty_positive("cc.hidden_dims", &self.cc.hidden_dims)?;
                let cells = self.cc.state_count * self.cc.action_count;
                if let Some(&d) = self.cc.hidden_dims.iter().find(|&&d| d > cells) {
                    return Err(Error::config("cc.hidden_dims", format!("{d} exceeds |X||A| = {cells}")));
                }
            }
            ExperimentKind::Ac => {
                nonempty_positive("n_grid", &self.n_grid)?;
                positive("n_test", self.n_test)?;
                positive("n_validation", self.n_validation)?;
                let ac = &self.ac;
                positive("ac.ambient_dim", ac.ambient_dim)?;
                if ac.true_dim == 0 || ac.true_dim > ac.ambient_dim {
                    return Err(Error::config("ac.true_dim", "must lie in 1..=ambient_dim"));
                }
                if ac.action_count < 2 {
                    return Err(Error::config("ac.action_count", "needs at least two actions"));
                }
                nonempty_positive("ac.truncation_dims", &ac.truncation_dims)?;
                if ac.truncation_dims.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::config("ac.truncation_dims", "must be strictly increasing"));
                }
                if ac.truncation_dims.last().is_some_and(|&d| d > ac.ambient_dim) {
                    return Err(Error::config("ac.truncation_dims", "must not exceed ambient_dim"));
                }
                if !(ac.holdout_split > 0.0 && ac.holdout_split < 1.0) {
                    return Err(Error::config("ac.holdout_split", "must lie in (0, 1)"));
                }
                for &n in &self.n_grid {
                    crate::selection::split_sizes(n, ac.holdout_split)
                        .map_err(|e| Error::config("n_grid", e.to_string()))?;
                }
            }
            ExperimentKind::LowerBound => {
                let lb = &self.lower_bound;
                nonempty_positive("lower_bound.n1", &lb.n1)?;
                nonempty_positive("lower_bound.n2", &lb.n2)?;
                if lb.algorithms.is_empty() {
                    return Err(Error::config("lower_bound.algorithms", "must not be empty"));
                }
                self.algorithms()?;
            }
        }
        Ok(())
    }

    pub fn algorithms(&self) -> Result<Vec<Algorithm>> {
        self.lower_bound
            .algorithms
            .iter()
            .map(|a| {
                a.parse()
                    .map_err(|e: Error| Error::config("lower_bound.algorithms", e.to_string()))
            })
            .collect()
    }

    pub fn algorithm_params(&self) -> AlgorithmParams {
        AlgorithmParams {
            lambda: self.lambda,
            delta: self.delta,
            penalty_scale: self.penalty_scale,
            holdout_split: self.ac.holdout_split,
        }
    }
}
