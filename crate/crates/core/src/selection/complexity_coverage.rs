use std::sync::Arc;

use crate::environment::{Dataset, StateHandle};
use crate::error::{Error, Result};
use crate::learner::{PessimisticLearner, Policy};
use crate::model_classes::ModelClass;
use crate::selection::report::{Audit, ChosenClass, Method, SelectionReport};

/// Joint pessimistic maximisation over (action, class).
///
/// The learners must share one dataset and carry `β` computed at `δ/M`; use
/// [`train_complexity_coverage`] to build them that way. `audit_states` are
/// the states on which the chosen class `k̂(x)` is recorded.
pub fn complexity_coverage_policy(
    learners: Vec<Arc<PessimisticLearner>>,
    audit_states: &[StateHandle],
) -> Result<(Policy, SelectionReport)> {
    if learners.is_empty() {
        return Err(Error::input("complexity-coverage selection needs at least one learner"));
    }
    let n = learners[0].fit.n;
    if learners.iter().any(|l| l.fit.n != n) {
        return Err(Error::input("all learners must be fit on the same dataset"));
    }
    let policy = Policy::ComplexityCoverage(learners.clone());

    let mut best = Vec::with_capacity(audit_states.len());
    let mut chosen = Vec::with_capacity(audit_states.len());
    for s in audit_states {
        let per_class = learners
            .iter()
            .map(|l| {
                let vals = l.pessimistic_values(s)?;
                let mut b = (f64::NEG_INFINITY, 0);
                for (a, &v) in vals.iter().enumerate() {
                    if v > b.0 {
                        b = (v, a);
                    }
                }
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()?;
        best.push(per_class);
        chosen.push(
            policy
                .act_with_class(s)?
                .1
                .expect("complexity-coverage reports a class"),
        );
    }

    let report = SelectionReport {
        method: Method::ComplexityCoverage,
        chosen_class: ChosenClass::PerState(chosen),
        policy: policy.clone(),
        audit: Audit::ComplexityCoverage {
            betas: learners.iter().map(|l| l.beta).collect(),
            best,
        },
    };
    Ok((policy, report))
}

/// Fits one pessimistic learner per class at confidence `δ/M` and combines
/// them.
pub fn train_complexity_coverage(
    classes: &[Arc<ModelClass>],
    data: &Dataset,
    lambda: f64,
    delta: f64,
    penalty_scale: f64,
    audit_states: &[StateHandle],
) -> Result<(Policy, SelectionReport)> {
    if classes.is_empty() {
        return Err(Error::input("complexity-coverage selection needs at least one class"));
    }
    let per_class_delta = delta / classes.len() as f64;
    let learners = classes
        .iter()
        .map(|c| PessimisticLearner::train(c.clone(), data, lambda, per_class_delta, penalty_scale).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    complexity_coverage_policy(learners, audit_states)
}
