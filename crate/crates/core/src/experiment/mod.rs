//! Configuration-driven reproduction of the simulation studies.

mod config;

pub use config::{AcSettings, CcSettings, ExperimentConfig, ExperimentKind, LowerBoundSettings};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::regret_estimate;
use crate::environment::{
    dirichlet_behavior, make_gaussian_instance, make_tabular_instance, sample_dataset, sample_states, BanditInstance,
    BehaviorPolicy, StateHandle,
};
use crate::error::Result;
use crate::learner::{GreedyModel, PessimisticLearner, Policy};
use crate::lower_bound::{ratio_experiment, write_ratio_csv, RatioOutcome};
use crate::model_classes::{realizable_family, truncation_family, ModelClass};
use crate::rng::derive_seed;
use crate::selection::{holdout_select, slope_policy_select, train_complexity_coverage, SelectionReport, StateWeights};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub n: usize,
    pub method: String,
    pub trial: usize,
    pub regret: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditEntry {
    pub n: usize,
    pub trial: usize,
    pub report: SelectionReport,
}

/// Per-trial regrets of one simulation study.
#[derive(Clone, Debug)]
pub struct TrialTable {
    /// Method names in their canonical order.
    pub methods: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub audits: Vec<AuditEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub n: usize,
    pub method: String,
    pub mean_regret: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug)]
pub enum RunOutput {
    Trials(TrialTable),
    LowerBound(Vec<RatioOutcome>),
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    Ok(match config.experiment {
        ExperimentKind::Cc => RunOutput::Trials(run_cc(config)?),
        ExperimentKind::Ac => RunOutput::Trials(run_ac(config)?),
        ExperimentKind::LowerBound => RunOutput::LowerBound(run_lower_bound(config)?),
    })
}

/// Everything about a trial that stays fixed across the n grid.
struct TrialSetup {
    instance: Arc<BanditInstance>,
    behavior: BehaviorPolicy,
    classes: Vec<Arc<ModelClass>>,
    test_states: Vec<StateHandle>,
    validation_states: Vec<StateHandle>,
}

type CellOutput = (Vec<ResultRow>, Vec<AuditEntry>);

fn run_grid(
    config: &ExperimentConfig,
    methods: Vec<String>,
    setup: impl Fn(usize) -> Result<TrialSetup> + Sync,
    cell: impl Fn(&TrialSetup, usize, usize) -> Result<CellOutput> + Sync,
) -> Result<TrialTable> {
    let setups = (0..config.trials)
        .into_par_iter()
        .map(&setup)
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.trials).map(move |t| (n, t)))
        .collect();
    let outputs = cells
        .par_iter()
        .map(|&(n, t)| cell(&setups[t], n, t))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut audits = Vec::new();
    for (r, a) in outputs {
        rows.extend(r);
        audits.extend(a);
    }
    let rank = |m: &str| methods.iter().position(|x| x == m).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (r.n, rank(&r.method), r.trial));
    audits.sort_by_key(|a| (a.n, a.trial));
    Ok(TrialTable { methods, rows, audits })
}

fn cell_seed(seed: u64, purpose: &str, trial: usize, n: usize) -> u64 {
    derive_seed(derive_seed(seed, purpose, trial as u64), "n", n as u64)
}

/// Realizable tabular family: one pessimistic learner per class against the
/// joint complexity-coverage rule.
pub fn run_cc(config: &ExperimentConfig) -> Result<TrialTable> {
    let cc = &config.cc;
    let seed = config.seed;
    let mut methods: Vec<String> = cc.hidden_dims.iter().map(|d| format!("class_{d}")).collect();
    methods.push("cc".into());
    run_grid(
        config,
        methods,
        |t| {
            let instance = make_tabular_instance(
                cc.state_count,
                cc.action_count,
                derive_seed(seed, "cc-instance", t as u64),
            )?;
            let behavior = dirichlet_behavior(cc.action_count, derive_seed(seed, "cc-behavior", t as u64))?;
            let classes = realizable_family(&instance, &cc.hidden_dims, derive_seed(seed, "cc-family", t as u64))?
                .into_iter()
                .map(Arc::new)
                .collect();
            let test_states = sample_states(&instance, config.n_test, derive_seed(seed, "cc-test", t as u64))?;
            Ok(TrialSetup {
                instance: Arc::new(instance),
                behavior,
                classes,
                test_states,
                validation_states: Vec::new(),
            })
        },
        |s, n, t| {
            let data = sample_dataset(&s.instance, &s.behavior, n, cell_seed(seed, "cc-data", t, n))?;
            let opt = Policy::Optimal(s.instance.clone());
            let regret = |p: &Policy| regret_estimate(&s.instance, &opt, &p.tabulate(cc.state_count)?, &s.test_states);
            let mut rows = Vec::with_capacity(s.classes.len() + 1);
            for (class, d) in s.classes.iter().zip(&cc.hidden_dims) {
                let learner =
                    PessimisticLearner::train(class.clone(), &data, config.lambda, config.delta, config.penalty_scale)?;
                rows.push(ResultRow {
                    n,
                    method: format!("class_{d}"),
                    trial: t,
                    regret: regret(&Policy::PessimisticSingle(Arc::new(learner)))?,
                });
            }
            let all_states: Vec<StateHandle> = (0..cc.state_count).map(StateHandle::Tabular).collect();
            let (policy, report) = train_complexity_coverage(
                &s.classes,
                &data,
                config.lambda,
                config.delta,
                config.penalty_scale,
                &all_states,
            )?;
            rows.push(ResultRow {
                n,
                method: "cc".into(),
                trial: t,
                regret: regret(&policy)?,
            });
            Ok((rows, vec![AuditEntry { n, trial: t, report }]))
        },
    )
}

/// Nested Gaussian truncations: pessimistic single-class baselines against
/// SLOPE and hold-out selection.
pub fn run_ac(config: &ExperimentConfig) -> Result<TrialTable> {
    let ac = &config.ac;
    let seed = config.seed;
    let mut methods: Vec<String> = ac.truncation_dims.iter().map(|d| format!("class_{d}")).collect();
    methods.extend(["slope".to_string(), "holdout".to_string()]);
    run_grid(
        config,
        methods,
        |t| {
            let instance = make_gaussian_instance(
                ac.ambient_dim,
                ac.true_dim,
                ac.action_count,
                derive_seed(seed, "ac-instance", t as u64),
            )?;
            let behavior = dirichlet_behavior(ac.action_count, derive_seed(seed, "ac-behavior", t as u64))?;
            let classes = truncation_family(ac.ambient_dim, &ac.truncation_dims)?
                .into_iter()
                .map(Arc::new)
                .collect();
            let test_states = sample_states(&instance, config.n_test, derive_seed(seed, "ac-test", t as u64))?;
            let validation_states = sample_states(
                &instance,
                config.n_validation,
                derive_seed(seed, "ac-validation", t as u64),
            )?;
            Ok(TrialSetup {
                instance: Arc::new(instance),
                behavior,
                classes,
                test_states,
                validation_states,
            })
        },
        |s, n, t| {
            let data = sample_dataset(&s.instance, &s.behavior, n, cell_seed(seed, "ac-data", t, n))?;
            let opt = Policy::Optimal(s.instance.clone());
            let regret = |p: &Policy| regret_estimate(&s.instance, &opt, p, &s.test_states);
            let mut rows = Vec::with_capacity(s.classes.len() + 2);
            for (class, d) in s.classes.iter().zip(&ac.truncation_dims) {
                let learner =
                    PessimisticLearner::train(class.clone(), &data, config.lambda, config.delta, config.penalty_scale)?;
                rows.push(ResultRow {
                    n,
                    method: format!("class_{d}"),
                    trial: t,
                    regret: regret(&Policy::PessimisticSingle(Arc::new(learner)))?,
                });
            }
            let models = s
                .classes
                .iter()
                .map(|c| GreedyModel::train(c.clone(), &data, config.lambda).map(Arc::new))
                .collect::<Result<Vec<_>>>()?;
            let weights = StateWeights::empirical(s.validation_states.clone())?;
            let (slope, slope_report) = slope_policy_select(&models, &weights, config.delta, config.penalty_scale)?;
            rows.push(ResultRow {
                n,
                method: "slope".into(),
                trial: t,
                regret: regret(&slope)?,
            });
            let (holdout, holdout_report) = holdout_select(
                &data,
                &s.classes,
                ac.holdout_split,
                config.lambda,
                cell_seed(seed, "ac-holdout", t, n),
            )?;
            rows.push(ResultRow {
                n,
                method: "holdout".into(),
                trial: t,
                regret: regret(&holdout)?,
            });
            let audits = vec![
                AuditEntry {
                    n,
                    trial: t,
                    report: slope_report,
                },
                AuditEntry {
                    n,
                    trial: t,
                    report: holdout_report,
                },
            ];
            Ok((rows, audits))
        },
    )
}

/// One ratio experiment per (algorithm, n₁, n₂).
pub fn run_lower_bound(config: &ExperimentConfig) -> Result<Vec<RatioOutcome>> {
    let params = config.algorithm_params();
    let mut out = Vec::new();
    for algorithm in config.algorithms()? {
        for &n1 in &config.lower_bound.n1 {
            for &n2 in &config.lower_bound.n2 {
                let seed = derive_seed(derive_seed(config.seed, "lower-bound", n1 as u64), "n2", n2 as u64);
                out.push(ratio_experiment(algorithm, n1, n2, config.trials, seed, &params)?);
            }
        }
    }
    Ok(out)
}

/// Mean and standard error per (n, method), in canonical order.
pub fn aggregate(table: &TrialTable) -> Vec<AggregateRow> {
    let mut out: Vec<AggregateRow> = Vec::new();
    let mut i = 0;
    let rows = &table.rows;
    while i < rows.len() {
        let j = rows[i..]
            .iter()
            .position(|r| r.n != rows[i].n || r.method != rows[i].method)
            .map_or(rows.len(), |p| i + p);
        let vals: Vec<f64> = rows[i..j].iter().map(|r| r.regret).collect();
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let stderr = if vals.len() > 1 {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
        } else {
            0.0
        };
        out.push(AggregateRow {
            n: rows[i].n,
            method: rows[i].method.clone(),
            mean_regret: mean,
            stderr,
        });
        i = j;
    }
    out
}

pub fn write_results_csv<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "method", "trial", "regret"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.method.clone(),
            r.trial.to_string(),
            format!("{:?}", r.regret),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(writer: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "method", "mean_regret", "stderr"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.method.clone(),
            format!("{:?}", r.mean_regret),
            format!("{:?}", r.stderr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv`, `aggregate.csv` (simulation studies only) and, with
/// `audit`, `report.json` into `dir`.
pub fn write_outputs(dir: &Path, output: &RunOutput, audit: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let create = |name: &str| -> Result<BufWriter<File>> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
    match output {
        RunOutput::Trials(table) => {
            write_results_csv(create("results.csv")?, &table.rows)?;
            write_aggregate_csv(create("aggregate.csv")?, &aggregate(table))?;
            if audit {
                let mut w = create("report.json")?;
                serde_json::to_writer_pretty(&mut w, &table.audits)?;
                w.flush()?;
            }
        }
        RunOutput::LowerBound(rows) => {
            write_ratio_csv(create("results.csv")?, rows)?;
            if audit {
                let mut w = create("report.json")?;
                serde_json::to_writer_pretty(&mut w, rows)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}
