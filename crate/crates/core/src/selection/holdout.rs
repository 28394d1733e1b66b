use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::environment::Dataset;
use crate::error::{Error, Result};
use crate::learner::{GreedyModel, Policy};
use crate::model_classes::ModelClass;
use crate::rng::stream;
use crate::selection::report::{first_argmin, Audit, ChosenClass, Method, SelectionReport};

pub const HOLDOUT_SPLIT: f64 = 0.8;

/// `(|D_in|, |D_out|)` with `|D_in| = ⌈split·n⌉`.
pub fn split_sizes(n: usize, split_fraction: f64) -> Result<(usize, usize)> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::input(format!(
            "split fraction {split_fraction} must lie in (0, 1)"
        )));
    }
    let smaller = split_fraction.min(1.0 - split_fraction);
    if (n as f64) * smaller < 1.0 - 1e-9 {
        return Err(Error::input(format!("{n} rows cannot be split at {split_fraction}")));
    }
    // Guard the product against round-off before taking the ceiling.
    let n_in = ((split_fraction * n as f64) - 1e-9).ceil() as usize;
    let n_in = n_in.clamp(1, n.saturating_sub(1));
    if n_in == 0 || n_in >= n {
        return Err(Error::input(format!("{n} rows cannot be split at {split_fraction}")));
    }
    Ok((n_in, n - n_in))
}

/// Mean squared prediction error `L̂_k` of each model on `held_out`.
pub fn holdout_losses(models: &[GreedyModel], held_out: &Dataset) -> Result<Vec<f64>> {
    if held_out.is_empty() {
        return Err(Error::input("hold-out set is empty"));
    }
    models
        .iter()
        .map(|g| {
            let total = held_out.rows.iter().try_fold(0.0, |acc, r| {
                let e = g.predict(&r.state, r.action)? - r.reward;
                Ok::<_, Error>(acc + e * e)
            })?;
            Ok(total / held_out.len() as f64)
        })
        .collect()
}

/// Fits each class on a seeded `split_fraction` prefix of the shuffled data
/// and keeps the greedy policy of the class with the smallest held-out loss.
pub fn holdout_select(
    data: &Dataset,
    classes: &[Arc<ModelClass>],
    split_fraction: f64,
    lambda: f64,
    seed: u64,
) -> Result<(Policy, SelectionReport)> {
    if classes.is_empty() {
        return Err(Error::input("hold-out selection needs at least one class"));
    }
    let (n_in, n_out) = split_sizes(data.len(), split_fraction)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut stream(seed, "holdout-split", 0));
    let d_in = data.subset(&order[..n_in]);
    let d_out = data.subset(&order[n_in..]);

    let models = classes
        .iter()
        .map(|c| GreedyModel::train(c.clone(), &d_in, lambda))
        .collect::<Result<Vec<_>>>()?;
    let losses = holdout_losses(&models, &d_out)?;
    let chosen = first_argmin(&losses);
    let policy = Policy::GreedySingle(Arc::new(models.into_iter().nth(chosen).expect("chosen index in range")));

    let report = SelectionReport {
        method: Method::HoldOut,
        chosen_class: ChosenClass::Index(chosen),
        policy: policy.clone(),
        audit: Audit::HoldOut { n_in, n_out, losses },
    };
    Ok((policy, report))
}
