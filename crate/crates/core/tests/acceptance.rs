//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails. Non-flag arguments filter criteria by name.

#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use batchsel::diagnostics::regret_weighted;
use batchsel::environment::{
    dirichlet_behavior, make_gaussian_instance, make_tabular_instance, sample_dataset, sample_states, BehaviorPolicy,
};
use batchsel::experiment::{aggregate, run, write_outputs, AggregateRow, ExperimentConfig, ExperimentKind, RunOutput};
use batchsel::learner::{beta_coefficient, fit_class, PessimisticLearner, Policy};
use batchsel::lower_bound::{build_hard_pair, ratio_experiment, Algorithm, AlgorithmParams};
use batchsel::model_classes::{realizable_family, truncation_family};
use batchsel::rng::stream;
use batchsel::selection::{slope_select, zeta_coefficient, SlopeInputs, StateWeights};
use batchsel::{CovarianceMatrix, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Means and standard errors keyed by (method, n).
fn summary(rows: &[AggregateRow]) -> HashMap<(String, usize), (f64, f64)> {
    rows.iter()
        .map(|r| ((r.method.clone(), r.n), (r.mean_regret, r.stderr)))
        .collect()
}

fn trial_table(config: &ExperimentConfig) -> batchsel::experiment::TrialTable {
    match run(config).expect("experiment runs") {
        RunOutput::Trials(t) => t,
        RunOutput::LowerBound(_) => unreachable!("trial experiment expected"),
    }
}

fn slope_constant() -> Outcome {
    let mut rng = stream(2024, "acceptance-slope", 0);
    let mut worst = 0.0f64;
    let mut violations = 0;
    for i in 0..1000 {
        let m = rng.random_range(1..=10);
        let truth: f64 = rng.random_range(-1.0..=1.0);
        let mut psi: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut xi: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..0.5)).collect();
        // Some instances pin errors to the extremes of the allowed band.
        let extreme = i % 2 == 0;
        psi.sort_by(|a, b| b.total_cmp(a));
        xi.sort_by(f64::total_cmp);
        let values: Vec<f64> = (0..m)
            .map(|k| {
                let u: f64 = if extreme {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    rng.random_range(-1.0..=1.0)
                };
                truth + u * (psi[k] + xi[k])
            })
            .collect();
        let (_, v) = slope_select(&SlopeInputs::new(values, xi.clone()).unwrap());
        let best = psi.iter().zip(&xi).map(|(p, x)| p + x).fold(f64::INFINITY, f64::min);
        let err = (v - truth).abs();
        if err > 5.0 * best + 1e-12 {
            violations += 1;
        }
        if best > 0.0 {
            worst = worst.max(err / best);
        }
    }
    outcome(
        violations == 0,
        format!("violations={violations}/1000 max |v̂-v|/min(ψ+ξ)={worst:.3}"),
    )
}

fn nested_monotonicity() -> Outcome {
    let mut rng = stream(2024, "acceptance-schur", 0);
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let d = rng.random_range(2..=10);
        let g = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut m = g.matmul(&g.transpose()).unwrap();
        m.add_diagonal(0.01);
        let cov = CovarianceMatrix::new(m, 0.0).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let full = cov.inv_quad_norm(&x).unwrap().powi(2);
        for k in 1..d {
            let part = cov.leading(k).unwrap().inv_quad_norm(&x[..k]).unwrap().powi(2);
            worst_gap = worst_gap.max(part - full);
        }
    }
    let psd_ok = worst_gap <= 1e-9;

    let dims = [2, 4, 6, 8, 10, 12];
    let mut width_gap = f64::NEG_INFINITY;
    for seed in 0..50 {
        let inst = make_gaussian_instance(12, 6, 4, seed).unwrap();
        let data = sample_dataset(&inst, &BehaviorPolicy::uniform(4).unwrap(), 200, seed).unwrap();
        let states = sample_states(&inst, 50, seed + 1000).unwrap();
        let classes = truncation_family(12, &dims).unwrap();
        let fits: Vec<_> = classes.iter().map(|c| fit_class(c, &data, 1.0).unwrap()).collect();
        let mut prev_cov = f64::NEG_INFINITY;
        let mut prev_xi = f64::NEG_INFINITY;
        let mut prev_norms: Option<Vec<f64>> = None;
        for (c, f) in classes.iter().zip(&fits) {
            let norms: Vec<f64> = states
                .iter()
                .flat_map(|s| (0..4).map(move |a| (s, a)))
                .map(|(s, a)| f.cov.inv_quad_norm(c.features(s, a).unwrap()).unwrap())
                .collect();
            if let Some(p) = &prev_norms {
                for (a, b) in p.iter().zip(&norms) {
                    width_gap = width_gap.max(a - b);
                }
            }
            let coverage = norms
                .chunks(4)
                .map(|ch| ch.iter().cloned().fold(0.0, f64::max))
                .sum::<f64>()
                / 50.0;
            let xi = zeta_coefficient(f.n, c.dim(), f.lambda, 0.05 / 6.0, &f.cov).unwrap() * coverage;
            width_gap = width_gap.max(prev_cov - coverage).max(prev_xi - xi);
            prev_cov = coverage;
            prev_xi = xi;
            prev_norms = Some(norms);
        }
    }
    let nested_ok = width_gap <= 1e-9;
    outcome(
        psd_ok && nested_ok,
        format!("psd max(block-full)={worst_gap:.2e} nested max decrease={width_gap:.2e} (tol 1e-9)"),
    )
}

fn single_class_bound() -> Outcome {
    let (states, actions, n) = (20, 10, 1000);
    let held: usize = (0..200u64)
        .map(|t| {
            let inst = make_tabular_instance(states, actions, 5000 + t).unwrap();
            let mu = dirichlet_behavior(actions, 7000 + t).unwrap();
            let class = Arc::new(realizable_family(&inst, &[10], 9000 + t).unwrap().remove(0));
            let data = sample_dataset(&inst, &mu, n, 11000 + t).unwrap();
            let learner = PessimisticLearner::train(class.clone(), &data, 1.0, 0.05, 1.0).unwrap();
            let beta = learner.beta;
            let weights = StateWeights::exact_tabular(&inst).unwrap();
            let opt = Policy::Optimal(Arc::new(inst.clone()));
            let regret = regret_weighted(
                &inst,
                &opt,
                &Policy::PessimisticSingle(Arc::new(learner.clone())),
                &weights,
            )
            .unwrap();
            let coverage = weights
                .mean(|s| {
                    learner
                        .fit
                        .cov
                        .inv_quad_norm(class.features(s, inst.optimal_action(s)?)?)
                })
                .unwrap();
            usize::from(regret <= 2.0 * beta * coverage + 0.05)
        })
        .sum();
    outcome(held >= 190, format!("bound held in {held}/200 trials (need ≥190)"))
}

fn cc_reproduction() -> Outcome {
    let config = ExperimentConfig::new(ExperimentKind::Cc);
    let table = trial_table(&config);
    let agg = summary(&aggregate(&table));
    let n_max = *config.n_grid.iter().max().unwrap();
    let best = config
        .cc
        .hidden_dims
        .iter()
        .map(|d| agg[&(format!("class_{d}"), n_max)].0)
        .fold(f64::INFINITY, f64::min);
    let cc = agg[&("cc".to_string(), n_max)].0;
    let level = cc <= 1.5 * best + 0.05;
    let curve: Vec<(f64, f64)> = config.n_grid.iter().map(|&n| agg[&("cc".to_string(), n)]).collect();
    let monotone = curve.windows(2).all(|w| w[1].0 <= w[0].0 + w[0].1.max(w[1].1));
    let means: Vec<String> = curve.iter().map(|c| format!("{:.4}", c.0)).collect();
    outcome(
        level && monotone,
        format!(
            "cc={cc:.4} best={best:.4} limit={:.4} nonincreasing={monotone} curve=[{}]",
            1.5 * best + 0.05,
            means.join(", ")
        ),
    )
}

fn ac_reproduction() -> Outcome {
    let config = ExperimentConfig::new(ExperimentKind::Ac);
    let table = trial_table(&config);
    let agg = summary(&aggregate(&table));
    let n_max = *config.n_grid.iter().max().unwrap();
    let n_min = *config.n_grid.iter().min().unwrap();
    let get = |m: &str, n: usize| agg[&(m.to_string(), n)];
    let best = config
        .ac
        .truncation_dims
        .iter()
        .map(|d| get(&format!("class_{d}"), n_max).0)
        .fold(f64::INFINITY, f64::min);
    let limit = 1.5 * best + 0.05;
    let slope = get("slope", n_max).0;
    let holdout = get("holdout", n_max).0;
    let (d30, d15) = (get("class_30", n_max), get("class_15", n_max));
    let approx = d30.0 <= d15.0 + d30.1.max(d15.1);
    let (s30, s100) = (get("class_30", n_min), get("class_100", n_min));
    let complexity = s30.0 <= s100.0 + s30.1.max(s100.1);
    let pass = slope <= limit && holdout <= limit && approx && complexity;
    outcome(
        pass,
        format!(
            "slope={slope:.4} holdout={holdout:.4} limit={limit:.4}; n={n_max}: d30={:.4} d15={:.4}; n={n_min}: d30={:.4} d100={:.4}",
            d30.0, d15.0, s30.0, s100.0
        ),
    )
}

fn lower_bound() -> Outcome {
    let params = AlgorithmParams::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for alg in [Algorithm::ComplexityCoverage, Algorithm::Slope, Algorithm::HoldOut] {
        let runs: Vec<_> = [16, 1024, 65536]
            .iter()
            .map(|&n1| ratio_experiment(alg, n1, 16, 2000, 77, &params).unwrap())
            .collect();
        let floor_ok = runs.iter().all(|r| {
            let se = if r.mean_regret[0] >= r.mean_regret[1] {
                r.stderr[0]
            } else {
                r.stderr[1]
            };
            r.max_mean_regret >= 1.0 / (8.0 * 4.0) - 3.0 * se
        });
        let growth = runs[2].ratio / runs[0].ratio;
        pass &= floor_ok && growth >= 10.0;
        let regrets: Vec<String> = runs.iter().map(|r| format!("{:.4}", r.max_mean_regret)).collect();
        parts.push(format!(
            "{}: max regret [{}] ratio growth {growth:.1}",
            alg.name(),
            regrets.join(", ")
        ));
    }
    outcome(pass, parts.join("; "))
}

fn closed_forms() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = stream(2024, "acceptance-closed-forms", 0);
    for _ in 0..20 {
        let n = rng.random_range(1..100_000usize);
        let d = rng.random_range(1..200usize);
        let lambda: f64 = rng.random_range(0.0..10.0);
        let delta: f64 = rng.random_range(1e-6..(-1.0f64).exp());
        let l = (1.0 / delta).ln();
        let (nf, df) = (n as f64, d as f64);
        let beta = (lambda * df / nf).sqrt() + ((5.0 * df + 10.0 * df.sqrt() * l.sqrt() + 10.0 * l) / nf).sqrt();
        let got = beta_coefficient(n, d, lambda, delta).unwrap();
        worst = worst.max((got - beta).abs() / beta);

        let diag: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..3.0)).collect();
        let cov = CovarianceMatrix::new(Matrix::from_diagonal(&diag), 0.0).unwrap();
        let lmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let lz = (4.0 * df / delta).ln();
        let zeta = (lambda / nf).sqrt()
            + 192.0 * (df / nf).sqrt() / lmin.sqrt() * lz
            + ((5.0 * df + 10.0 * (df * lz).sqrt() + 10.0 * lz) / nf).sqrt();
        let got = zeta_coefficient(n, d, lambda, delta, &cov).unwrap();
        worst = worst.max((got - zeta).abs() / zeta);
    }
    let mut theta_err = 0.0f64;
    for (n1, n2) in [(16, 16), (1024, 16), (65536, 16), (3, 1000)] {
        let pair = build_hard_pair(n1, n2).unwrap();
        let g = 0.5 / (n2 as f64).sqrt();
        let expect = [[vec![-g], vec![-g, -2.0 * g]], [vec![-g], vec![-g, 0.0]]];
        for i in 0..2 {
            for k in 0..2 {
                for (a, b) in pair.theta_star[i][k].iter().zip(&expect[i][k]) {
                    theta_err = theta_err.max((a - b).abs());
                }
            }
        }
    }
    outcome(
        worst <= 1e-10 && theta_err <= 1e-10,
        format!("max relative error {worst:.2e}, max θ* error {theta_err:.2e} (tol 1e-10)"),
    )
}

fn results_bytes(config: &ExperimentConfig, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let output = pool.install(|| run(config)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &output, false).unwrap();
    std::fs::read(dir.path().join("results.csv")).unwrap()
}

fn determinism() -> Outcome {
    let mut cc = ExperimentConfig::new(ExperimentKind::Cc);
    cc.trials = 3;
    cc.n_grid = vec![100, 400];
    cc.seed = 5;
    let mut ac = ExperimentConfig::new(ExperimentKind::Ac);
    ac.trials = 2;
    ac.n_grid = vec![200];
    ac.n_test = 100;
    ac.n_validation = 100;
    ac.seed = 5;
    let mut lb = ExperimentConfig::new(ExperimentKind::LowerBound);
    lb.trials = 50;
    lb.lower_bound.n1 = vec![16, 256];
    lb.seed = 5;
    let mut mismatches = Vec::new();
    for (name, config) in [("cc", &cc), ("ac", &ac), ("lower_bound", &lb)] {
        let reference = results_bytes(config, 1);
        let same = [1, 8].iter().all(|&t| results_bytes(config, t) == reference);
        if !same || reference.is_empty() {
            mismatches.push(name);
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("experiments differing across runs/threads: {mismatches:?}"),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 8] = [
        ("1 slope_constant", slope_constant),
        ("2 nested_monotonicity", nested_monotonicity),
        ("3 single_class_bound", single_class_bound),
        ("4 cc_reproduction", cc_reproduction),
        ("5 ac_reproduction", ac_reproduction),
        ("6 lower_bound", lower_bound),
        ("7 closed_forms", closed_forms),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {name}: {verdict} [{:.1}s] {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
