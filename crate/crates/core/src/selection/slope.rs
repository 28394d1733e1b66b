use std::sync::Arc;

use serde::Serialize;

use crate::environment::{BanditInstance, StateHandle};
use crate::error::{Error, Result};
use crate::learner::{log_inv_delta, GreedyModel, Policy};
use crate::model_classes::{check_nested, ModelClass, DEFAULT_PROBE_COUNT};
use crate::numerics::CovarianceMatrix;
use crate::scalar::Scalar;
use crate::selection::report::{first_argmax, Audit, ChosenClass, Method, SelectionReport};

/// Constant on the `‖V^{-1/2}‖` term of `ζ`.
pub const ZETA_SPECTRAL_CONSTANT: f64 = 192.0;

/// Closed interval `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lower: T, upper: T) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::input(format!("interval [{lower}, {upper}] is empty")));
        }
        Ok(Self { lower, upper })
    }

    /// `[center − 2·width, center + 2·width]`.
    pub fn around(center: T, width: T) -> Self {
        let r = T::lit(2.0) * width;
        Self {
            lower: center - r,
            upper: center + r,
        }
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

/// Value estimates `v̂_k` with their widths `ξ_k`, ordered from the smallest
/// class to the largest.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeInputs<T> {
    values: Vec<T>,
    widths: Vec<T>,
}

impl<T: Scalar> SlopeInputs<T> {
    pub fn new(values: Vec<T>, widths: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("SLOPE needs at least one estimate"));
        }
        if values.len() != widths.len() {
            return Err(Error::Dimension {
                expected: values.len(),
                found: widths.len(),
            });
        }
        if widths.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::input("widths must be finite and nonnegative"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("values must be finite"));
        }
        Ok(Self { values, widths })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn widths(&self) -> &[T] {
        &self.widths
    }

    pub fn intervals(&self) -> Vec<Interval<T>> {
        self.values
            .iter()
            .zip(&self.widths)
            .map(|(&v, &w)| Interval::around(v, w))
            .collect()
    }
}

/// Smallest `k` (0-based) such that the intervals `k..M` share a point, and
/// the estimate `v̂_k` at that index. The last index always qualifies.
pub fn slope_select<T: Scalar>(inputs: &SlopeInputs<T>) -> (usize, T) {
    let intervals = inputs.intervals();
    let m = intervals.len();
    let mut max_lower = intervals[m - 1].lower;
    let mut min_upper = intervals[m - 1].upper;
    let mut chosen = m - 1;
    for k in (0..m - 1).rev() {
        max_lower = max_lower.max(intervals[k].lower);
        min_upper = min_upper.min(intervals[k].upper);
        if max_lower <= min_upper {
            chosen = k;
        } else {
            // Once the suffix intersection is empty it stays empty.
            break;
        }
    }
    (chosen, inputs.values[chosen])
}

/// `ζ` from its log term `log(4d/δ)` and `‖V^{-1/2}‖`.
fn zeta_from_parts<T: Scalar>(n: usize, d: usize, lambda: T, log_term: T, inv_sqrt_norm: T) -> T {
    let (n, d) = (T::from_count(n), T::from_count(d));
    let ridge = (lambda / n).sqrt();
    let spectral = T::lit(ZETA_SPECTRAL_CONSTANT) * (d / n).sqrt() * inv_sqrt_norm * log_term;
    let width = ((T::lit(5.0) * d + T::lit(10.0) * (d * log_term).sqrt() + T::lit(10.0) * log_term) / n).sqrt();
    ridge + spectral + width
}

/// `ζ = √(λ/n) + 192 √(d/n) ‖V^{-1/2}‖ log(4d/δ) + √((5d + 10√(d log(4d/δ)) + 10 log(4d/δ))/n)`.
pub fn zeta_coefficient<T: Scalar>(n: usize, d: usize, lambda: T, delta: T, cov: &CovarianceMatrix<T>) -> Result<T> {
    if n == 0 || d == 0 {
        return Err(Error::input("n and d must be positive"));
    }
    if !(lambda >= T::zero()) {
        return Err(Error::input("lambda must be nonnegative"));
    }
    let log_inv = log_inv_delta(delta)?;
    let log_term = (T::lit(4.0) * T::from_count(d)).ln() + log_inv;
    Ok(zeta_from_parts(n, d, lambda, log_term, cov.inv_sqrt_spectral_norm()?))
}

/// States with weights summing to one, standing in for `E_X`.
#[derive(Clone, Debug)]
pub struct StateWeights {
    pub states: Vec<StateHandle>,
    pub weights: Vec<f64>,
}

impl StateWeights {
    /// Uniform weights over a sample.
    pub fn empirical(states: Vec<StateHandle>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::input("need at least one state"));
        }
        let w = 1.0 / states.len() as f64;
        Ok(Self {
            weights: vec![w; states.len()],
            states,
        })
    }

    /// Every state of a tabular instance weighted by its probability.
    pub fn exact_tabular(instance: &BanditInstance) -> Result<Self> {
        let t = instance
            .as_tabular()
            .ok_or(Error::Unsupported("exact expectations need a tabular instance"))?;
        Ok(Self {
            states: (0..t.state_count()).map(StateHandle::Tabular).collect(),
            weights: t.state_distribution.clone(),
        })
    }

    pub fn mean(&self, mut f: impl FnMut(&StateHandle) -> Result<f64>) -> Result<f64> {
        self.states
            .iter()
            .zip(&self.weights)
            .try_fold(0.0, |acc, (s, &w)| Ok(acc + w * f(s)?))
    }
}

/// SLOPE selection over greedy single-class policies.
///
/// `models` must be fit on one dataset and be nested. Values and worst-case
/// coverage are averaged over `expectation`. `width_scale` multiplies every
/// `ζ_k`.
pub fn slope_policy_select(
    models: &[Arc<GreedyModel>],
    expectation: &StateWeights,
    delta: f64,
    width_scale: f64,
) -> Result<(Policy, SelectionReport)> {
    if models.is_empty() {
        return Err(Error::input("SLOPE needs at least one class"));
    }
    if expectation.states.is_empty() {
        return Err(Error::input("SLOPE needs a nonempty validation set"));
    }
    let classes: Vec<ModelClass> = models.iter().map(|m| (*m.class).clone()).collect();
    if !check_nested(&classes, &expectation.states, DEFAULT_PROBE_COUNT) {
        return Err(Error::NotNested);
    }
    let m = models.len();
    let per_class_delta = delta / m as f64;

    // preds[k][x][a] = f̂_k(x, a)
    let preds: Vec<Vec<Vec<f64>>> = models
        .iter()
        .map(|g| {
            expectation
                .states
                .iter()
                .map(|s| g.predictions(s))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    // Greedy action of each policy ℓ at each state.
    let actions: Vec<Vec<usize>> = preds
        .iter()
        .map(|per_state| per_state.iter().map(|p| first_argmax(p)).collect())
        .collect();

    let weights = &expectation.weights;
    let values: Vec<Vec<f64>> = (0..m)
        .map(|l| {
            (0..m)
                .map(|k| {
                    preds[k]
                        .iter()
                        .zip(&actions[l])
                        .zip(weights)
                        .map(|((p, &a), &w)| w * p[a])
                        .sum()
                })
                .collect()
        })
        .collect();

    let mut zetas = Vec::with_capacity(m);
    let mut coverage_worst = Vec::with_capacity(m);
    for g in models {
        let cov = &g.fit.cov;
        zetas.push(width_scale * zeta_coefficient(g.fit.n, g.class.dim(), g.fit.lambda, per_class_delta, cov)?);
        coverage_worst.push(expectation.mean(|s| {
            let actions = g.predictions(s)?.len();
            (0..actions).try_fold(0.0f64, |mx, a| Ok(mx.max(cov.inv_quad_norm(g.class.features(s, a)?)?)))
        })?);
    }
    let widths: Vec<f64> = zetas.iter().zip(&coverage_worst).map(|(z, c)| z * c).collect();

    let mut intervals = Vec::with_capacity(m);
    let mut selected_class = Vec::with_capacity(m);
    let mut policy_values = Vec::with_capacity(m);
    for row in &values {
        let inputs = SlopeInputs::new(row.clone(), widths.clone())?;
        let (k, v) = slope_select(&inputs);
        intervals.push(inputs.intervals());
        selected_class.push(k);
        policy_values.push(v);
    }
    let chosen = first_argmax(&policy_values);
    let policy = Policy::GreedySingle(models[chosen].clone());

    let report = SelectionReport {
        method: Method::Slope,
        chosen_class: ChosenClass::Index(chosen),
        policy: policy.clone(),
        audit: Audit::Slope {
            zetas,
            coverage_worst,
            widths,
            values,
            intervals,
            selected_class,
            policy_values,
        },
    };
    Ok((policy, report))
}
