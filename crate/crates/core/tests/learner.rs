#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use batchsel::diagnostics::regret_estimate;
use batchsel::environment::{
    make_tabular_instance, sample_dataset, sample_states, BanditInstance, BehaviorPolicy, DataRow, Dataset, StateHandle,
};
use batchsel::learner::{beta_coefficient, extract_pessimistic_policy, PessimisticLearner, Policy};
use batchsel::model_classes::{realizable_family, ModelClass};
use batchsel::selection::train_complexity_coverage;
use proptest::prelude::*;

fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| [r.clone(), vec![v]].concat()).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    (0..n).map(|r| m[r][n] / m[r][r]).collect()
}

/// Pessimistic values of every (state, action) from scratch: explicit normal
/// equations and `φᵀV⁻¹φ` through a dense solve.
fn brute_force_values(vectors: &[Vec<Vec<f64>>], data: &Dataset, lambda: f64, beta: f64, scale: f64) -> Vec<Vec<f64>> {
    let d = vectors[0][0].len();
    let n = data.len() as f64;
    let mut v = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for r in &data.rows {
        let phi = &vectors[r.state.tabular_index().unwrap()][r.action];
        for i in 0..d {
            for j in 0..d {
                v[i][j] += phi[i] * phi[j] / n;
            }
            rhs[i] += phi[i] * r.reward / n;
        }
    }
    for (i, row) in v.iter_mut().enumerate() {
        row[i] += lambda / n;
    }
    let theta = solve(&v, &rhs);
    vectors
        .iter()
        .map(|per_state| {
            per_state
                .iter()
                .map(|phi| {
                    let w = solve(&v, phi);
                    let quad: f64 = phi.iter().zip(&w).map(|(a, b)| a * b).sum();
                    phi.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() - scale * beta * quad.sqrt()
                })
                .collect()
        })
        .collect()
}

fn toy_vectors() -> Vec<Vec<Vec<f64>>> {
    vec![
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.7, 0.7]],
        vec![vec![0.2, 1.0], vec![1.0, -0.3], vec![0.5, 0.1]],
        vec![vec![-1.0, 0.4], vec![0.3, 0.3], vec![0.0, 0.0]],
    ]
}

fn toy_instance() -> BanditInstance {
    BanditInstance::tabular(
        vec![0.3, 0.3, 0.4],
        vec![vec![0.5, -0.2, 0.1], vec![0.0, 0.3, 0.2], vec![-0.4, 0.1, 0.0]],
        1.0,
    )
    .unwrap()
}

#[test]
fn learner_matches_brute_force_enumeration() {
    let inst = toy_instance();
    let data = sample_dataset(&inst, &BehaviorPolicy::new(vec![0.5, 0.3, 0.2]).unwrap(), 60, 4).unwrap();
    let class = Arc::new(ModelClass::tabular(toy_vectors()).unwrap());
    let learner = PessimisticLearner::train(class, &data, 1.0, 0.05, 1.0).unwrap();
    let beta = beta_coefficient(60, 2, 1.0, 0.05).unwrap();
    assert_eq!(learner.beta, beta);
    let oracle = brute_force_values(&toy_vectors(), &data, 1.0, beta, 1.0);
    let policy = extract_pessimistic_policy(Arc::new(learner.clone()));
    for (x, expect) in oracle.iter().enumerate() {
        let s = StateHandle::Tabular(x);
        let got = learner.pessimistic_values(&s).unwrap();
        for (g, e) in got.iter().zip(expect) {
            assert!((g - e).abs() < 1e-10);
        }
        let best = (0..3).fold(0, |b, a| if expect[a] > expect[b] { a } else { b });
        assert_eq!(policy.act(&s).unwrap(), best);
    }
}

#[test]
fn shifting_rewards_at_a_state_keeps_the_action() {
    // One-hot class with equal counts per cell: a reward shift at state 1
    // moves every action's estimate there by the same amount.
    let onehot: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|x| {
            (0..3)
                .map(|a| (0..6).map(|j| if j == x * 3 + a { 1.0 } else { 0.0 }).collect())
                .collect()
        })
        .collect();
    let class = Arc::new(ModelClass::tabular(onehot).unwrap());
    let rewards = [[0.3, -0.1, 0.2], [0.05, 0.4, 0.35]];
    let make = |shift: f64| {
        let rows = (0..4)
            .flat_map(|_| (0..2).flat_map(move |x| (0..3).map(move |a| (x, a))))
            .map(|(x, a)| DataRow {
                state: StateHandle::Tabular(x),
                action: a,
                reward: rewards[x][a] + if x == 1 { shift } else { 0.0 },
            })
            .collect();
        Dataset::new(rows, None, 3).unwrap()
    };
    for shift in [-2.0, 0.5, 7.0] {
        let base = PessimisticLearner::train(class.clone(), &make(0.0), 1.0, 0.05, 1.0).unwrap();
        let moved = PessimisticLearner::train(class.clone(), &make(shift), 1.0, 0.05, 1.0).unwrap();
        for x in 0..2 {
            let s = StateHandle::Tabular(x);
            assert_eq!(
                Policy::PessimisticSingle(Arc::new(base.clone())).act(&s).unwrap(),
                Policy::PessimisticSingle(Arc::new(moved.clone())).act(&s).unwrap()
            );
        }
    }
}

#[test]
fn realizable_regret_shrinks_with_data() {
    let mut small = 0.0;
    let mut large = 0.0;
    for seed in 0..20u64 {
        let inst = make_tabular_instance(20, 10, seed).unwrap();
        let class = Arc::new(realizable_family(&inst, &[5], seed).unwrap().remove(0));
        let mu = BehaviorPolicy::uniform(10).unwrap();
        let test = sample_states(&inst, 500, seed).unwrap();
        let opt = Policy::Optimal(Arc::new(inst.clone()));
        for (n, acc) in [(250, &mut small), (4000, &mut large)] {
            let data = sample_dataset(&inst, &mu, n, seed + 100).unwrap();
            let l = PessimisticLearner::train(class.clone(), &data, 1.0, 0.05, 1.0).unwrap();
            let pi = extract_pessimistic_policy(Arc::new(l)).tabulate(20).unwrap();
            *acc += regret_estimate(&inst, &opt, &pi, &test).unwrap() / 20.0;
        }
    }
    assert!(large <= small, "{large} > {small}");
}

#[test]
fn complexity_coverage_matches_joint_enumeration() {
    let inst = toy_instance();
    let data = sample_dataset(&inst, &BehaviorPolicy::uniform(3).unwrap(), 80, 1).unwrap();
    let second: Vec<Vec<Vec<f64>>> = toy_vectors()
        .iter()
        .enumerate()
        .map(|(x, ps)| {
            ps.iter()
                .enumerate()
                .map(|(a, p)| vec![p[0], ((x * 3 + a) as f64).sin()])
                .collect()
        })
        .collect();
    let vecs = [toy_vectors(), second];
    let classes: Vec<Arc<ModelClass>> = vecs
        .iter()
        .map(|v| Arc::new(ModelClass::tabular(v.clone()).unwrap()))
        .collect();
    let states: Vec<StateHandle> = (0..3).map(StateHandle::Tabular).collect();
    let (policy, report) = train_complexity_coverage(&classes, &data, 1.0, 0.05, 0.1, &states).unwrap();
    let beta = beta_coefficient(80, 2, 1.0, 0.025).unwrap();
    let oracle: Vec<Vec<Vec<f64>>> = vecs
        .iter()
        .map(|v| brute_force_values(v, &data, 1.0, beta, 0.1))
        .collect();
    let mut chosen = Vec::new();
    for (x, s) in states.iter().enumerate() {
        // Scan actions first, then classes, keeping the first strict maximum.
        let mut best = (0, 0, f64::NEG_INFINITY);
        for a in 0..3 {
            for (k, o) in oracle.iter().enumerate() {
                if o[x][a] > best.2 {
                    best = (a, k, o[x][a]);
                }
            }
        }
        assert_eq!(policy.act_with_class(s).unwrap(), (best.0, Some(best.1)));
        chosen.push(best.1);
    }
    assert_eq!(report.chosen_class, batchsel::selection::ChosenClass::PerState(chosen));
    assert_eq!(report.replay(), report.chosen_class);
}

#[test]
fn complexity_coverage_degenerate_cases() {
    let inst = make_tabular_instance(6, 4, 3).unwrap();
    let data = sample_dataset(&inst, &BehaviorPolicy::uniform(4).unwrap(), 300, 3).unwrap();
    let family: Vec<Arc<ModelClass>> = realizable_family(&inst, &[2, 5], 3)
        .unwrap()
        .into_iter()
        .map(Arc::new)
        .collect();
    let states: Vec<StateHandle> = (0..6).map(StateHandle::Tabular).collect();

    let (single, _) = train_complexity_coverage(&family[..1], &data, 1.0, 0.05, 0.1, &states).unwrap();
    let alone = PessimisticLearner::train(family[0].clone(), &data, 1.0, 0.05, 0.1).unwrap();
    let alone = extract_pessimistic_policy(Arc::new(alone));
    let (twice, _) =
        train_complexity_coverage(&[family[0].clone(), family[0].clone()], &data, 1.0, 0.1, 0.1, &states).unwrap();
    for s in &states {
        assert_eq!(single.act(s).unwrap(), alone.act(s).unwrap());
        assert_eq!(twice.act(s).unwrap(), alone.act(s).unwrap());
    }
    assert!(train_complexity_coverage(&[], &data, 1.0, 0.05, 0.1, &states).is_err());
}

proptest! {
    #[test]
    fn pessimism_never_exceeds_prediction(seed in 0u64..500, scale in 0.0f64..2.0) {
        let inst = toy_instance();
        let data = sample_dataset(&inst, &BehaviorPolicy::uniform(3).unwrap(), 20, seed).unwrap();
        let class = Arc::new(ModelClass::tabular(toy_vectors()).unwrap());
        let l = PessimisticLearner::train(class.clone(), &data, 1.0, 0.05, scale).unwrap();
        for x in 0..3 {
            let s = StateHandle::Tabular(x);
            for a in 0..3 {
                let plain = l.fit.predict(class.features(&s, a).unwrap());
                prop_assert!(l.pessimistic_value(&s, a).unwrap() <= plain + 1e-15);
            }
        }
    }
}
