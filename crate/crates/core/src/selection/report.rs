use serde::Serialize;

use crate::learner::Policy;
use crate::selection::slope::{slope_select, Interval, SlopeInputs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ComplexityCoverage,
    Slope,
    HoldOut,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChosenClass {
    Index(usize),
    /// Class attaining the joint maximum at each audited state.
    PerState(Vec<usize>),
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Audit {
    ComplexityCoverage {
        betas: Vec<f64>,
        /// `best[x][k] = (max_a f̂_k(x, a), first argmax action)`.
        best: Vec<Vec<(f64, usize)>>,
    },
    Slope {
        zetas: Vec<f64>,
        coverage_worst: Vec<f64>,
        widths: Vec<f64>,
        /// `values[ℓ][k] = v̂_k(π̂_ℓ)`.
        values: Vec<Vec<f64>>,
        intervals: Vec<Vec<Interval<f64>>>,
        selected_class: Vec<usize>,
        policy_values: Vec<f64>,
    },
    HoldOut {
        n_in: usize,
        n_out: usize,
        losses: Vec<f64>,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectionReport {
    pub method: Method,
    pub chosen_class: ChosenClass,
    #[serde(skip)]
    pub policy: Policy,
    pub audit: Audit,
}

impl SelectionReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    /// Re-applies the selection rule to the audited quantities.
    pub fn replay(&self) -> ChosenClass {
        match &self.audit {
            Audit::ComplexityCoverage { best, .. } => ChosenClass::PerState(
                best.iter()
                    .map(|per_class| {
                        let mut pick = (0, usize::MAX, f64::NEG_INFINITY);
                        for (k, &(v, a)) in per_class.iter().enumerate() {
                            if v > pick.2 || (v == pick.2 && a < pick.1) {
                                pick = (k, a, v);
                            }
                        }
                        pick.0
                    })
                    .collect(),
            ),
            Audit::Slope { values, widths, .. } => {
                let policy_values: Vec<f64> = values
                    .iter()
                    .map(|row| {
                        let inputs = SlopeInputs::new(row.clone(), widths.clone()).expect("audited widths are valid");
                        slope_select(&inputs).1
                    })
                    .collect();
                ChosenClass::Index(first_argmax(&policy_values))
            }
            Audit::HoldOut { losses, .. } => ChosenClass::Index(first_argmin(losses)),
        }
    }
}

pub(crate) fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn first_argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}
