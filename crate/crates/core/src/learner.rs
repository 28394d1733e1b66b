//! The single-class pessimistic linear learner and deterministic policies.

use std::sync::Arc;

use crate::environment::{BanditInstance, Dataset, StateHandle};
use crate::error::{Error, Result};
use crate::model_classes::{FeatureMap, ModelClass};
use crate::numerics::{RidgeAccumulator, RidgeFit};
use crate::scalar::Scalar;

/// Penalty multiplier that matches the confidence-width theory.
pub const THEORY_PENALTY_SCALE: f64 = 1.0;
/// Penalty multiplier used by the synthetic experiments.
pub const EXPERIMENT_PENALTY_SCALE: f64 = 0.1;

/// `log(1/δ)` after checking `0 < δ ≤ 1/e`.
pub(crate) fn log_inv_delta<T: Scalar>(delta: T) -> Result<T> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(Error::input(format!("delta {delta} must lie in (0, 1/e]")));
    }
    let l = -delta.ln();
    // 1/e itself must pass even when it was rounded on the way in.
    if l < T::one() - T::lit(4.0) * T::epsilon() {
        return Err(Error::input(format!("delta {delta} must lie in (0, 1/e]")));
    }
    Ok(l)
}

/// `β_{λ,δ}(n, d) = √(λd/n) + √((5d + 10 √d √log(1/δ) + 10 log(1/δ)) / n)`.
pub fn beta_coefficient<T: Scalar>(n: usize, d: usize, lambda: T, delta: T) -> Result<T> {
    if n == 0 || d == 0 {
        return Err(Error::input("n and d must be positive"));
    }
    if !(lambda >= T::zero()) {
        return Err(Error::input("lambda must be nonnegative"));
    }
    let l = log_inv_delta(delta)?;
    let (n, d) = (T::from_count(n), T::from_count(d));
    let ridge = (lambda * d / n).sqrt();
    let width = ((T::lit(5.0) * d + T::lit(10.0) * d.sqrt() * l.sqrt() + T::lit(10.0) * l) / n).sqrt();
    Ok(ridge + width)
}

/// Ridge fit of one class on a dataset. Tabular maps on tabular states are
/// accumulated per (state, action) cell.
pub fn fit_class(class: &ModelClass, data: &Dataset, lambda: f64) -> Result<RidgeFit<f64>> {
    if data.is_empty() {
        return Err(Error::input("cannot fit on an empty dataset"));
    }
    let mut acc = RidgeAccumulator::new(class.dim());
    match class.map() {
        FeatureMap::Tabular { action_count, .. } if data.rows.iter().all(|r| r.state.tabular_index().is_some()) => {
            let cells = class.state_count().unwrap_or(0) * action_count;
            let mut counts = vec![0usize; cells];
            let mut sums = vec![0.0; cells];
            for r in &data.rows {
                let x = r.state.tabular_index().expect("checked tabular");
                let c = x * action_count + r.action;
                if c >= cells || r.action >= *action_count {
                    return Err(Error::input(format!("row ({x}, {}) outside the tabular map", r.action)));
                }
                counts[c] += 1;
                sums[c] += r.reward;
            }
            for (c, (&k, &s)) in counts.iter().zip(&sums).enumerate() {
                if k > 0 {
                    let state = StateHandle::Tabular(c / action_count);
                    acc.push_repeated(class.features(&state, c % action_count)?, s, k)?;
                }
            }
        }
        _ => {
            for r in &data.rows {
                acc.push(class.features(&r.state, r.action)?, r.reward)?;
            }
        }
    }
    acc.fit(lambda)
}

/// Number of actions available at `state` under `class`.
pub(crate) fn action_count(class: &ModelClass, state: &StateHandle) -> Result<usize> {
    match (class.map(), state) {
        (FeatureMap::Tabular { action_count, .. }, _) => Ok(*action_count),
        (FeatureMap::Truncation { .. }, StateHandle::Features(fs)) => Ok(fs.action_count()),
        (FeatureMap::Truncation { .. }, StateHandle::Tabular(_)) => {
            Err(Error::RepresentationMismatch("truncation map given a tabular state"))
        }
    }
}

/// Index of the first maximum.
fn first_argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Clone, Debug)]
pub struct PessimisticLearner {
    pub fit: RidgeFit<f64>,
    pub class: Arc<ModelClass>,
    pub beta: f64,
    pub penalty_scale: f64,
}

impl PessimisticLearner {
    /// Fits `class` on `data` and sets `β = β_{λ,δ}(n, d_k)`.
    pub fn train(class: Arc<ModelClass>, data: &Dataset, lambda: f64, delta: f64, penalty_scale: f64) -> Result<Self> {
        let fit = fit_class(&class, data, lambda)?;
        let beta = beta_coefficient(fit.n, class.dim(), lambda, delta)?;
        Self::new(fit, class, beta, penalty_scale)
    }

    pub fn new(fit: RidgeFit<f64>, class: Arc<ModelClass>, beta: f64, penalty_scale: f64) -> Result<Self> {
        if fit.dim() != class.dim() {
            return Err(Error::Dimension {
                expected: class.dim(),
                found: fit.dim(),
            });
        }
        if !(beta >= 0.0) || !(penalty_scale >= 0.0) {
            return Err(Error::input("beta and the penalty scale must be nonnegative"));
        }
        Ok(Self {
            fit,
            class,
            beta,
            penalty_scale,
        })
    }

    /// `⟨φ, θ̂⟩ − c·β·‖φ‖_{V⁻¹}`.
    pub fn pessimistic_value(&self, state: &StateHandle, action: usize) -> Result<f64> {
        let phi = self.class.features(state, action)?;
        let mean = self.fit.predict(phi);
        if self.beta == 0.0 {
            return Ok(mean);
        }
        Ok(mean - self.penalty_scale * self.beta * self.fit.cov.inv_quad_norm(phi)?)
    }

    pub fn pessimistic_values(&self, state: &StateHandle) -> Result<Vec<f64>> {
        (0..action_count(&self.class, state)?)
            .map(|a| self.pessimistic_value(state, a))
            .collect()
    }
}

pub fn pessimistic_value(learner: &PessimisticLearner, state: &StateHandle, action: usize) -> Result<f64> {
    learner.pessimistic_value(state, action)
}

/// Greedy (unpenalised) ridge predictor of one class.
#[derive(Clone, Debug)]
pub struct GreedyModel {
    pub fit: RidgeFit<f64>,
    pub class: Arc<ModelClass>,
}

impl GreedyModel {
    pub fn train(class: Arc<ModelClass>, data: &Dataset, lambda: f64) -> Result<Self> {
        Ok(Self {
            fit: fit_class(&class, data, lambda)?,
            class,
        })
    }

    pub fn predict(&self, state: &StateHandle, action: usize) -> Result<f64> {
        Ok(self.fit.predict(self.class.features(state, action)?))
    }

    pub fn predictions(&self, state: &StateHandle) -> Result<Vec<f64>> {
        (0..action_count(&self.class, state)?)
            .map(|a| self.predict(state, a))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FixedRule {
    Constant(usize),
    /// Action per tabular state index.
    Table(Vec<usize>),
}

/// Deterministic policy. Every learned kind breaks ties toward the lowest
/// action index.
#[derive(Clone, Debug)]
pub enum Policy {
    PessimisticSingle(Arc<PessimisticLearner>),
    GreedySingle(Arc<GreedyModel>),
    /// Joint argmax over (action, class) of the pessimistic values.
    ComplexityCoverage(Vec<Arc<PessimisticLearner>>),
    Fixed(FixedRule),
    Optimal(Arc<BanditInstance>),
}

impl Policy {
    pub fn act(&self, state: &StateHandle) -> Result<usize> {
        Ok(self.act_with_class(state)?.0)
    }

    /// The action and, for complexity-coverage policies, the class that
    /// attained the maximum.
    pub fn act_with_class(&self, state: &StateHandle) -> Result<(usize, Option<usize>)> {
        match self {
            Policy::PessimisticSingle(l) => Ok((first_argmax(l.pessimistic_values(state)?), None)),
            Policy::GreedySingle(g) => Ok((first_argmax(g.predictions(state)?), None)),
            Policy::ComplexityCoverage(learners) => {
                let first = learners.first().ok_or_else(|| Error::input("empty learner list"))?;
                let actions = action_count(&first.class, state)?;
                let values = learners
                    .iter()
                    .map(|l| l.pessimistic_values(state))
                    .collect::<Result<Vec<_>>>()?;
                // Action-major scan: first strict maximum is the lowest action,
                // then the lowest class.
                let mut best = (0, 0, f64::NEG_INFINITY);
                for a in 0..actions {
                    for (k, v) in values.iter().enumerate() {
                        if v[a] > best.2 {
                            best = (a, k, v[a]);
                        }
                    }
                }
                Ok((best.0, Some(best.1)))
            }
            Policy::Fixed(FixedRule::Constant(a)) => Ok((*a, None)),
            Policy::Fixed(FixedRule::Table(t)) => {
                let x = state
                    .tabular_index()
                    .ok_or(Error::RepresentationMismatch("table policy given a feature state"))?;
                t.get(x)
                    .map(|&a| (a, None))
                    .ok_or_else(|| Error::input(format!("state {x} outside the policy table")))
            }
            Policy::Optimal(inst) => Ok((inst.optimal_action(state)?, None)),
        }
    }

    /// Evaluates the policy on every tabular state once and returns the
    /// equivalent lookup table.
    pub fn tabulate(&self, state_count: usize) -> Result<Policy> {
        let table = (0..state_count)
            .map(|x| self.act(&StateHandle::Tabular(x)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Policy::Fixed(FixedRule::Table(table)))
    }
}

/// `π̂(x) = argmax_a f̂(x, a)` with lowest-index ties.
pub fn extract_pessimistic_policy(learner: Arc<PessimisticLearner>) -> Policy {
    Policy::PessimisticSingle(learner)
}
