//! Ground-truth-aware evaluation: regret, best-fit parameters, approximation
//! errors, coverage terms and the single-class / oracle bounds.

use std::io::Write;

use rand::Rng as _;
use serde::Serialize;

use crate::environment::{concentrability, BanditInstance, BehaviorPolicy, Dataset, StateHandle, StateModel};
use crate::error::{Error, Result};
use crate::learner::{action_count, beta_coefficient, Policy};
use crate::model_classes::ModelClass;
use crate::numerics::{dot, norm, Cholesky, Matrix, RidgeFit, Svd, SymmetricEigen};
use crate::rng::stream;
use crate::selection::{zeta_coefficient, StateWeights};

/// Relative singular-value cutoff for the fixed-design pseudo-inverse.
pub const PINV_RCOND: f64 = 1e-10;
/// Relative eigenvalue below which `Σ_k` counts as singular.
pub const POPULATION_SINGULAR_TOL: f64 = 1e-10;
pub const DEFAULT_POPULATION_BUDGET: usize = 10_000;

/// Minimum-norm `θ* ∈ argmin Σ (φᵢᵀθ − fᵢ)²`.
pub fn fixed_design_theta_star(features: &Matrix<f64>, true_means: &[f64]) -> Result<Vec<f64>> {
    if features.rows() != true_means.len() {
        return Err(Error::Dimension {
            expected: features.rows(),
            found: true_means.len(),
        });
    }
    Svd::new(features).solve_min_norm(true_means, PINV_RCOND)
}

/// `θ*` of `class` on the rows of `data`. Rows of a tabular map that share a
/// (state, action) cell are merged with weight `√count`, which leaves the
/// least-squares problem unchanged.
pub fn theta_star_for(class: &ModelClass, data: &Dataset) -> Result<Vec<f64>> {
    let means = data
        .true_means
        .as_ref()
        .ok_or(Error::GroundTruthUnavailable("dataset carries no true means"))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets = Vec::new();
    if let (Some(states), crate::model_classes::FeatureMap::Tabular { action_count, .. }) =
        (class.state_count(), class.map())
    {
        if data.rows.iter().all(|r| r.state.tabular_index().is_some()) {
            let mut counts = vec![0usize; states * action_count];
            let mut first_mean = vec![0.0; states * action_count];
            for (r, &m) in data.rows.iter().zip(means) {
                let c = r.state.tabular_index().expect("tabular") * action_count + r.action;
                if c >= counts.len() {
                    return Err(Error::input("row outside the tabular map"));
                }
                counts[c] += 1;
                first_mean[c] = m;
            }
            for (c, &k) in counts.iter().enumerate() {
                if k > 0 {
                    let w = (k as f64).sqrt();
                    let state = StateHandle::Tabular(c / action_count);
                    let phi = class.features(&state, c % action_count)?;
                    rows.push(phi.iter().map(|v| v * w).collect());
                    targets.push(first_mean[c] * w);
                }
            }
            return fixed_design_theta_star(&Matrix::from_rows(&rows)?, &targets);
        }
    }
    for r in &data.rows {
        rows.push(class.features(&r.state, r.action)?.to_vec());
    }
    targets.extend_from_slice(means);
    fixed_design_theta_star(&Matrix::from_rows(&rows)?, &targets)
}

/// `E_X |f(X, π(X)) − ⟨φ, θ*⟩| + E_X |⟨φ, θ*⟩ − f(X, π̂(X))|` over `states`.
pub fn approx_error_eps(
    theta_star: &[f64],
    class: &ModelClass,
    pi: &Policy,
    pi_hat: &Policy,
    instance: &BanditInstance,
    states: &[StateHandle],
) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::input("need at least one state"));
    }
    let dev = |s: &StateHandle, a: usize| -> Result<f64> {
        Ok((instance.mean_reward(s, a)? - dot(class.features(s, a)?, theta_star)).abs())
    };
    let total = states.iter().try_fold(0.0, |acc, s| {
        Ok::<_, Error>(acc + dev(s, pi.act(s)?)? + dev(s, pi_hat.act(s)?)?)
    })?;
    Ok(total / states.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorstCaseError {
    /// `min_θ max_{x,a} |⟨φ, θ⟩ − f|`, attained by the returned iterate.
    pub value: f64,
    /// Certified lower bound from the final weighted least-squares step.
    pub lower_bound: f64,
    pub method: &'static str,
    pub iterations: usize,
}

/// Chebyshev fit over the whole (state, action) table by Lawson's iteratively
/// reweighted least squares. Each weighted fit certifies a lower bound, the
/// iterate itself an upper bound.
pub fn eps_worst(class: &ModelClass, instance: &BanditInstance) -> Result<WorstCaseError> {
    let tab = instance.as_tabular().ok_or(Error::Unsupported(
        "worst-case approximation error needs a tabular instance",
    ))?;
    let mut rows = Vec::new();
    let mut target = Vec::new();
    for x in 0..tab.state_count() {
        for a in 0..instance.action_count {
            rows.push(class.features(&StateHandle::Tabular(x), a)?.to_vec());
            target.push(tab.means[x][a]);
        }
    }
    let design = Matrix::from_rows(&rows)?;
    let m = target.len();
    let mut weights = vec![1.0 / m as f64; m];
    let mut best = f64::INFINITY;
    let mut lower = 0.0f64;
    let mut iterations = 0;
    for it in 0..2000 {
        iterations = it + 1;
        let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let weighted = Matrix::from_fn(m, design.cols(), |i, j| design[(i, j)] * sw[i]);
        let wt: Vec<f64> = target.iter().zip(&sw).map(|(t, s)| t * s).collect();
        let theta = Svd::new(&weighted).solve_min_norm(&wt, PINV_RCOND)?;
        let resid: Vec<f64> = design
            .row_iter()
            .zip(&target)
            .map(|(r, &t)| dot(r, &theta) - t)
            .collect();
        let wls: f64 = resid.iter().zip(&weights).map(|(r, w)| w * r * r).sum();
        lower = lower.max(wls.sqrt());
        let max_abs = resid.iter().fold(0.0f64, |mx, r| mx.max(r.abs()));
        best = best.min(max_abs);
        if best <= 1e-12 || best - lower <= 1e-6 * best {
            break;
        }
        let total: f64 = weights.iter().zip(&resid).map(|(w, r)| w * r.abs()).sum();
        if total <= 0.0 {
            break;
        }
        for (w, r) in weights.iter_mut().zip(&resid) {
            *w = *w * r.abs() / total;
        }
    }
    Ok(WorstCaseError {
        value: best,
        lower_bound: lower.min(best),
        method: "lawson-irls",
        iterations,
    })
}

/// Population quantities of one class under `µ`.
#[derive(Clone, Debug)]
pub struct PopulationModel {
    pub class_index: usize,
    /// `Σ_k = E_µ[φ φᵀ]`.
    pub sigma: Matrix<f64>,
    /// `θ̄_k = Σ_k⁻¹ E_µ[φ f]`.
    pub theta_bar: Vec<f64>,
    /// `min_θ E_µ (⟨φ, θ⟩ − f)²`.
    pub residual: f64,
    /// `ε̃_k = 2 √(C(µ) · residual)`.
    pub tilde_eps: f64,
    pub concentrability: f64,
    /// Right-hand side `E_µ[φ f]` the parameter was solved against.
    pub moment: Vec<f64>,
}

/// Weighted (φ, f) draws from `D × µ`: the exact table for tabular
/// instances, `budget` Monte-Carlo pairs otherwise.
fn population_pairs(
    class: &ModelClass,
    instance: &BanditInstance,
    mu: &BehaviorPolicy,
    budget: usize,
    seed: u64,
) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    if mu.action_count() != instance.action_count {
        return Err(Error::Dimension {
            expected: instance.action_count,
            found: mu.action_count(),
        });
    }
    match &instance.state_model {
        StateModel::Tabular(t) => {
            let mut out = Vec::with_capacity(t.state_count() * instance.action_count);
            for (x, &px) in t.state_distribution.iter().enumerate() {
                for (a, &pa) in mu.probs().iter().enumerate() {
                    let s = StateHandle::Tabular(x);
                    out.push((px * pa, class.features(&s, a)?.to_vec(), t.means[x][a]));
                }
            }
            Ok(out)
        }
        StateModel::GaussianFeatures(_) => {
            if budget == 0 {
                return Err(Error::input("Monte-Carlo budget must be positive"));
            }
            let states = crate::environment::sample_states(instance, budget, seed)?;
            let mut rng = stream(seed, "population-actions", 0);
            let w = 1.0 / budget as f64;
            states
                .iter()
                .map(|s| {
                    let a = mu.sample(&mut rng);
                    Ok((w, class.features(s, a)?.to_vec(), instance.mean_reward(s, a)?))
                })
                .collect()
        }
    }
}

pub fn population_model(
    class_index: usize,
    class: &ModelClass,
    instance: &BanditInstance,
    mu: &BehaviorPolicy,
    budget: usize,
    seed: u64,
) -> Result<PopulationModel> {
    let c_mu = concentrability(mu)?;
    let pairs = population_pairs(class, instance, mu, budget, seed)?;
    let d = class.dim();
    let mut sigma = Matrix::zeros(d, d);
    let mut moment = vec![0.0; d];
    for (w, phi, f) in &pairs {
        for i in 0..d {
            let wi = w * phi[i];
            for j in 0..d {
                sigma[(i, j)] += wi * phi[j];
            }
            moment[i] += wi * f;
        }
    }
    sigma.symmetrize();
    let eig = SymmetricEigen::new(&sigma)?;
    let rel = if eig.max() > 0.0 { eig.min() / eig.max() } else { 0.0 };
    if !(rel > POPULATION_SINGULAR_TOL) {
        return Err(Error::IllPosedPopulation(rel));
    }
    let theta_bar = Cholesky::factor(&sigma, 0.0)?.solve(&moment)?;
    let residual: f64 = pairs
        .iter()
        .map(|(w, phi, f)| {
            let r = dot(phi, &theta_bar) - f;
            w * r * r
        })
        .sum();
    Ok(PopulationModel {
        class_index,
        sigma,
        theta_bar,
        residual,
        tilde_eps: 2.0 * (c_mu * residual).sqrt(),
        concentrability: c_mu,
        moment,
    })
}

impl PopulationModel {
    /// `‖θ̂ − θ̄‖_{Σ}`.
    pub fn sigma_distance(&self, fit: &RidgeFit<f64>) -> Result<f64> {
        let diff: Vec<f64> = fit.theta_hat.iter().zip(&self.theta_bar).map(|(a, b)| a - b).collect();
        Ok(dot(&diff, &self.sigma.matvec(&diff)?).max(0.0).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AltApproxErrors {
    pub eps_worst: WorstCaseError,
    pub eps_sq: f64,
}

/// `min_θ E_µ (⟨φ, θ⟩ − f)²` by population least squares.
pub fn eps_sq(
    class: &ModelClass,
    instance: &BanditInstance,
    mu: &BehaviorPolicy,
    budget: usize,
    seed: u64,
) -> Result<f64> {
    Ok(population_model(0, class, instance, mu, budget, seed)?.residual)
}

/// Both alternative approximation errors of a tabular instance.
pub fn alt_approx_errors(
    class: &ModelClass,
    instance: &BanditInstance,
    mu: &BehaviorPolicy,
    budget: usize,
    seed: u64,
) -> Result<AltApproxErrors> {
    let eps_worst = eps_worst(class, instance)?;
    Ok(AltApproxErrors {
        eps_worst,
        eps_sq: eps_sq(class, instance, mu, budget, seed)?,
    })
}

/// `(E_X ‖φ(X, π(X))‖_{V⁻¹}, E_X max_a ‖φ(X, a)‖_{V⁻¹})` over `states`.
pub fn coverage_terms(
    fit: &RidgeFit<f64>,
    class: &ModelClass,
    policy: &Policy,
    states: &[StateHandle],
) -> Result<(f64, f64)> {
    if states.is_empty() {
        return Err(Error::input("need at least one state"));
    }
    let mut comparator = 0.0;
    let mut worst = 0.0;
    for s in states {
        let chosen = policy.act(s)?;
        let actions = action_count(class, s)?;
        if chosen >= actions {
            return Err(Error::input(format!("policy action {chosen} outside the class")));
        }
        let mut mx = 0.0f64;
        for a in 0..actions {
            let v = fit.cov.inv_quad_norm(class.features(s, a)?)?;
            if a == chosen {
                comparator += v;
            }
            mx = mx.max(v);
        }
        worst += mx;
    }
    let n = states.len() as f64;
    Ok((comparator / n, worst / n))
}

/// The per-class error decomposition of the single-class bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorDecomposition {
    pub class_index: usize,
    pub dim: usize,
    pub n: usize,
    pub theta_star: Vec<f64>,
    pub theta_star_norm: f64,
    pub approx_eps: f64,
    pub coverage_comparator: f64,
    pub coverage_worst: f64,
    pub beta: f64,
    pub zeta: f64,
    /// `approx_eps + 2·beta·coverage_comparator`.
    pub bound_value: f64,
}

impl ErrorDecomposition {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        class_index: usize,
        dim: usize,
        n: usize,
        theta_star: Vec<f64>,
        approx_eps: f64,
        coverage_comparator: f64,
        coverage_worst: f64,
        beta: f64,
        zeta: f64,
    ) -> Self {
        Self {
            class_index,
            dim,
            n,
            theta_star_norm: norm(&theta_star),
            theta_star,
            approx_eps,
            coverage_comparator,
            coverage_worst,
            beta,
            zeta,
            bound_value: approx_eps + 2.0 * beta * coverage_comparator,
        }
    }

    /// `ε_k + √(d_k/n) · E_X ‖φ_k(X, π(X))‖_{V_k⁻¹}`.
    pub fn oracle_term(&self) -> f64 {
        self.approx_eps + (self.dim as f64 / self.n as f64).sqrt() * self.coverage_comparator
    }
}

/// Computes the full decomposition for one class, comparator `pi` and learned
/// policy `pi_hat`.
#[allow(clippy::too_many_arguments)]
pub fn decompose(
    class_index: usize,
    class: &ModelClass,
    fit: &RidgeFit<f64>,
    data: &Dataset,
    pi: &Policy,
    pi_hat: &Policy,
    instance: &BanditInstance,
    states: &[StateHandle],
    delta: f64,
) -> Result<ErrorDecomposition> {
    let theta_star = theta_star_for(class, data)?;
    let approx = approx_error_eps(&theta_star, class, pi, pi_hat, instance, states)?;
    let (comparator, worst) = coverage_terms(fit, class, pi, states)?;
    let beta = beta_coefficient(fit.n, class.dim(), fit.lambda, delta)?;
    let zeta = zeta_coefficient(fit.n, class.dim(), fit.lambda, delta, &fit.cov)?;
    Ok(ErrorDecomposition::new(
        class_index,
        class.dim(),
        fit.n,
        theta_star,
        approx,
        comparator,
        worst,
        beta,
        zeta,
    ))
}

/// `min_k {ε_k + √(d_k/n) · coverage_k}`, lowest index on ties.
pub fn oracle_bound(decomps: &[ErrorDecomposition]) -> Result<(usize, f64)> {
    let first = decomps
        .first()
        .ok_or_else(|| Error::input("need at least one decomposition"))?;
    let mut best = (0, first.oracle_term());
    for (k, d) in decomps.iter().enumerate().skip(1) {
        let v = d.oracle_term();
        if v < best.1 {
            best = (k, v);
        }
    }
    Ok(best)
}

/// `E_X [f(X, π(X)) − f(X, π̂(X))]` over `states`.
pub fn regret_estimate(instance: &BanditInstance, pi: &Policy, pi_hat: &Policy, states: &[StateHandle]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::input("need at least one state"));
    }
    // Summing per-state differences keeps the estimate exactly antisymmetric.
    let total = states.iter().try_fold(0.0, |acc, s| {
        let diff = instance.mean_reward(s, pi.act(s)?)? - instance.mean_reward(s, pi_hat.act(s)?)?;
        Ok::<_, Error>(acc + diff)
    })?;
    Ok(total / states.len() as f64)
}

/// Regret under explicit state weights (exact for tabular instances).
pub fn regret_weighted(instance: &BanditInstance, pi: &Policy, pi_hat: &Policy, weights: &StateWeights) -> Result<f64> {
    weights.mean(|s| Ok(instance.mean_reward(s, pi.act(s)?)? - instance.mean_reward(s, pi_hat.act(s)?)?))
}

pub fn write_decompositions_csv<W: Write>(writer: W, rows: &[(usize, ErrorDecomposition)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "trial",
        "class",
        "dim",
        "n",
        "theta_star_norm",
        "approx_eps",
        "coverage_comparator",
        "coverage_worst",
        "beta",
        "zeta",
        "bound_value",
    ])?;
    for (trial, d) in rows {
        w.write_record([
            trial.to_string(),
            d.class_index.to_string(),
            d.dim.to_string(),
            d.n.to_string(),
            format!("{:?}", d.theta_star_norm),
            format!("{:?}", d.approx_eps),
            format!("{:?}", d.coverage_comparator),
            format!("{:?}", d.coverage_worst),
            format!("{:?}", d.beta),
            format!("{:?}", d.zeta),
            format!("{:?}", d.bound_value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_population_csv<W: Write>(writer: W, rows: &[(usize, PopulationModel)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "trial",
        "class",
        "dim",
        "concentrability",
        "residual",
        "tilde_eps",
        "theta_bar_norm",
    ])?;
    for (trial, p) in rows {
        w.write_record([
            trial.to_string(),
            p.class_index.to_string(),
            p.theta_bar.len().to_string(),
            format!("{:?}", p.concentrability),
            format!("{:?}", p.residual),
            format!("{:?}", p.tilde_eps),
            format!("{:?}", norm(&p.theta_bar)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Draws a uniformly random action per state; used by probes in tests and
/// diagnostics that need an arbitrary comparator.
pub fn random_table_policy(state_count: usize, action_count: usize, seed: u64) -> Policy {
    let mut rng = stream(seed, "random-table-policy", 0);
    Policy::Fixed(crate::learner::FixedRule::Table(
        (0..state_count).map(|_| rng.random_range(0..action_count)).collect(),
    ))
}
