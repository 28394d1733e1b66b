//! Two-point hard instances on which no selection rule can match the oracle
//! inequality, and the Monte-Carlo experiment measuring the gap.

use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::fixed_design_theta_star;
use crate::environment::{sample_fixed_design, BanditInstance, Dataset, StateHandle};
use crate::error::{Error, Result};
use crate::learner::{GreedyModel, Policy};
use crate::model_classes::ModelClass;
use crate::numerics::Matrix;
use crate::rng::derive_seed;
use crate::selection::{holdout_select, slope_policy_select, train_complexity_coverage, StateWeights, HOLDOUT_SPLIT};

const CONSTRUCTION_TOL: f64 = 1e-10;

/// ν₁ has arm means `(−Δ, −2Δ)`, ν₂ has `(−Δ, 0)`; both with unit noise and a
/// single state. `F₁` sees only arm 1, `F₂` is one-hot.
#[derive(Clone, Debug)]
pub struct HardInstancePair {
    /// `Δ = 1/(2√n₂)`.
    pub delta_gap: f64,
    pub n1: usize,
    pub n2: usize,
    pub instances: [Arc<BanditInstance>; 2],
    pub classes: [Arc<ModelClass>; 2],
    /// `theta_star[i][k]`: best fit of class `k` on the design in instance `i`.
    pub theta_star: [[Vec<f64>; 2]; 2],
}

/// `Δ = 1/(2√n₂)`.
pub fn delta_gap(n2: usize) -> f64 {
    0.5 / (n2 as f64).sqrt()
}

pub fn build_hard_pair(n1: usize, n2: usize) -> Result<HardInstancePair> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::input("both arms need at least one sample"));
    }
    let gap = delta_gap(n2);
    let nu1 = BanditInstance::tabular(vec![1.0], vec![vec![-gap, -2.0 * gap]], 1.0)?;
    let nu2 = BanditInstance::tabular(vec![1.0], vec![vec![-gap, 0.0]], 1.0)?;
    let f1 = ModelClass::tabular(vec![vec![vec![1.0], vec![0.0]]])?;
    let f2 = ModelClass::tabular(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]])?;

    // Repeated design rows merged with weight √count.
    let (w1, w2) = ((n1 as f64).sqrt(), (n2 as f64).sqrt());
    let fit = |class: &ModelClass, inst: &BanditInstance| -> Result<Vec<f64>> {
        let s = StateHandle::Tabular(0);
        let rows: Vec<Vec<f64>> = [(0, w1), (1, w2)]
            .iter()
            .map(|&(a, w)| Ok(class.features(&s, a)?.iter().map(|v| v * w).collect()))
            .collect::<Result<_>>()?;
        let targets = [inst.mean_reward(&s, 0)? * w1, inst.mean_reward(&s, 1)? * w2];
        fixed_design_theta_star(&Matrix::from_rows(&rows)?, &targets)
    };
    let theta_star = [[fit(&f1, &nu1)?, fit(&f2, &nu1)?], [fit(&f1, &nu2)?, fit(&f2, &nu2)?]];
    let expected = [[vec![-gap], vec![-gap, -2.0 * gap]], [vec![-gap], vec![-gap, 0.0]]];
    for (got, want) in theta_star.iter().flatten().zip(expected.iter().flatten()) {
        if got.iter().zip(want).any(|(g, w)| (g - w).abs() > CONSTRUCTION_TOL) {
            return Err(Error::Realizability(
                got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max),
            ));
        }
    }
    Ok(HardInstancePair {
        delta_gap: gap,
        n1,
        n2,
        instances: [Arc::new(nu1), Arc::new(nu2)],
        classes: [Arc::new(f1), Arc::new(f2)],
        theta_star,
    })
}

impl HardInstancePair {
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    /// Optimal arm: `a₁` in ν₁, `a₂` in ν₂.
    pub fn optimal_arm(&self, which: usize) -> usize {
        which
    }

    /// `n₁` rows of arm 1 followed by `n₂` rows of arm 2.
    pub fn design(&self) -> impl Iterator<Item = (StateHandle, usize)> + '_ {
        (0..self.n()).map(move |i| (StateHandle::Tabular(0), usize::from(i >= self.n1)))
    }

    pub fn sample(&self, which: usize, seed: u64) -> Result<Dataset> {
        sample_fixed_design(&self.instances[which], self.design(), seed)
    }

    /// `f(π*) − f(arm)`.
    pub fn regret(&self, which: usize, arm: usize) -> Result<f64> {
        let s = StateHandle::Tabular(0);
        let inst = &self.instances[which];
        Ok(inst.mean_reward(&s, self.optimal_arm(which))? - inst.mean_reward(&s, arm)?)
    }
}

/// Oracle-inequality denominator of instance `which` (0 for ν₁, 1 for ν₂)
/// from the closed-form bounds: worst-case approximation error over `π̂`,
/// and `‖φ_k(π)‖_{V_k⁻¹} ≤ √(n/n_π)` for the coverage factor.
pub fn oracle_denominator(pair: &HardInstancePair, which: usize) -> Result<f64> {
    let (n1, n2) = (pair.n1 as f64, pair.n2 as f64);
    match which {
        0 => Ok((2.0 * pair.delta_gap + 1.0 / n1.sqrt()).min((2.0 / n1).sqrt())),
        1 => Ok((1.0 / n1.sqrt()).min((2.0 / n2).sqrt())),
        _ => Err(Error::input(format!("instance index {which} must be 0 or 1"))),
    }
}

/// The same minimum evaluated exactly for a run that returned `arm`, with
/// ridge parameter `lambda`.
pub fn realized_denominator(pair: &HardInstancePair, which: usize, arm: usize, lambda: f64) -> Result<f64> {
    let s = StateHandle::Tabular(0);
    let inst = &pair.instances[which];
    let pi = pair.optimal_arm(which);
    let n = pair.n() as f64;
    let counts = [pair.n1 as f64, pair.n2 as f64];
    let mut best = f64::INFINITY;
    for (k, class) in pair.classes.iter().enumerate() {
        let theta = &pair.theta_star[which][k];
        let dev = |a: usize| -> Result<f64> {
            Ok((crate::numerics::dot(class.features(&s, a)?, theta) - inst.mean_reward(&s, a)?).abs())
        };
        let eps = dev(pi)? + dev(arm)?;
        // Both design matrices are diagonal: V = diag((λ + Σ φ_j²)/n).
        let phi = class.features(&s, pi)?;
        let mut quad = 0.0;
        for (j, &v) in phi.iter().enumerate() {
            let mass: f64 = (0..2)
                .map(|a| class.features(&s, a).map(|p| p[j] * p[j] * counts[a]))
                .sum::<Result<f64>>()?;
            quad += v * v * n / (lambda + mass);
        }
        let dk = class.dim() as f64;
        best = best.min(eps + (dk / n).sqrt() * quad.sqrt());
    }
    Ok(best)
}

/// Selection rules that can be run end-to-end on the hard pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    ComplexityCoverage,
    Slope,
    HoldOut,
    /// Ignores the data; useful as a calibration baseline.
    AlwaysArm(usize),
}

impl Algorithm {
    pub fn name(&self) -> String {
        match self {
            Algorithm::ComplexityCoverage => "cc".into(),
            Algorithm::Slope => "slope".into(),
            Algorithm::HoldOut => "holdout".into(),
            Algorithm::AlwaysArm(a) => format!("arm_{a}"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cc" => Ok(Algorithm::ComplexityCoverage),
            "slope" => Ok(Algorithm::Slope),
            "holdout" => Ok(Algorithm::HoldOut),
            other => other
                .strip_prefix("arm_")
                .and_then(|a| a.parse().ok())
                .map(Algorithm::AlwaysArm)
                .ok_or_else(|| Error::input(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgorithmParams {
    pub lambda: f64,
    pub delta: f64,
    pub penalty_scale: f64,
    pub holdout_split: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            delta: 0.05,
            penalty_scale: 0.1,
            holdout_split: HOLDOUT_SPLIT,
        }
    }
}

/// Runs `algorithm` on the two classes of `pair` and returns its arm.
pub fn run_algorithm(
    algorithm: Algorithm,
    pair: &HardInstancePair,
    data: &Dataset,
    params: &AlgorithmParams,
    seed: u64,
) -> Result<usize> {
    let state = StateHandle::Tabular(0);
    let classes = pair.classes.to_vec();
    let policy: Policy = match algorithm {
        Algorithm::ComplexityCoverage => {
            train_complexity_coverage(
                &classes,
                data,
                params.lambda,
                params.delta,
                params.penalty_scale,
                std::slice::from_ref(&state),
            )?
            .0
        }
        Algorithm::Slope => {
            let models = classes
                .iter()
                .map(|c| GreedyModel::train(c.clone(), data, params.lambda).map(Arc::new))
                .collect::<Result<Vec<_>>>()?;
            let weights = StateWeights::exact_tabular(&pair.instances[0])?;
            slope_policy_select(&models, &weights, params.delta, params.penalty_scale)?.0
        }
        Algorithm::HoldOut => holdout_select(data, &classes, params.holdout_split, params.lambda, seed)?.0,
        Algorithm::AlwaysArm(a) => {
            if a >= 2 {
                return Err(Error::input(format!("arm {a} does not exist")));
            }
            return Ok(a);
        }
    };
    policy.act(&state)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioOutcome {
    pub algorithm: String,
    pub n1: usize,
    pub n2: usize,
    pub trials: usize,
    pub mean_regret: [f64; 2],
    pub stderr: [f64; 2],
    /// Larger of the two closed-form denominators.
    pub denominator: f64,
    /// Mean over trials of the exactly evaluated minimum, per instance.
    pub realized_denominator: [f64; 2],
    pub max_mean_regret: f64,
    pub ratio: f64,
}

/// Averages the regret of `algorithm` over `trials` reward draws on each
/// instance of the hard pair.
pub fn ratio_experiment(
    algorithm: Algorithm,
    n1: usize,
    n2: usize,
    trials: usize,
    seed: u64,
    params: &AlgorithmParams,
) -> Result<RatioOutcome> {
    if trials == 0 {
        return Err(Error::input("need at least one trial"));
    }
    let pair = build_hard_pair(n1, n2)?;
    let mut mean_regret = [0.0; 2];
    let mut stderr = [0.0; 2];
    let mut realized = [0.0; 2];
    for which in 0..2 {
        let per_trial = (0..trials)
            .into_par_iter()
            .map(|t| {
                let trial_seed = derive_seed(seed, "lower-bound-trial", (which * trials + t) as u64);
                let data = pair.sample(which, trial_seed)?;
                let arm = run_algorithm(algorithm, &pair, &data, params, trial_seed)?;
                Ok((
                    pair.regret(which, arm)?,
                    realized_denominator(&pair, which, arm, params.lambda)?,
                ))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let m = trials as f64;
        let mean = per_trial.iter().map(|r| r.0).sum::<f64>() / m;
        let var = if trials > 1 {
            per_trial.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        mean_regret[which] = mean;
        stderr[which] = (var / m).sqrt();
        realized[which] = per_trial.iter().map(|r| r.1).sum::<f64>() / m;
    }
    let denominator = oracle_denominator(&pair, 0)?.max(oracle_denominator(&pair, 1)?);
    let max_mean_regret = mean_regret[0].max(mean_regret[1]);
    Ok(RatioOutcome {
        algorithm: algorithm.name(),
        n1,
        n2,
        trials,
        mean_regret,
        stderr,
        denominator,
        realized_denominator: realized,
        max_mean_regret,
        ratio: max_mean_regret / denominator,
    })
}

pub const RATIO_CSV_HEADER: [&str; 8] = [
    "algorithm",
    "n1",
    "n2",
    "trials",
    "mean_regret_nu1",
    "mean_regret_nu2",
    "denominator",
    "ratio",
];

pub fn write_ratio_csv<W: Write>(writer: W, rows: &[RatioOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RATIO_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.n1.to_string(),
            r.n2.to_string(),
            r.trials.to_string(),
            format!("{:?}", r.mean_regret[0]),
            format!("{:?}", r.mean_regret[1]),
            format!("{:?}", r.denominator),
            format!("{:?}", r.ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}
