//! Synthetic contextual-bandit instances, behavior policies and batch
//! dataset generation.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, Cholesky, Matrix};
use crate::rng::{stream, Rng};

/// Per-action ambient feature vectors of one state.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureState {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureState {
    pub fn new(per_action: Vec<Vec<f64>>) -> Result<Self> {
        let dim = per_action.first().map_or(0, Vec::len);
        if per_action.is_empty() || dim == 0 {
            return Err(Error::input("feature state needs at least one nonempty vector"));
        }
        let mut data = Vec::with_capacity(dim * per_action.len());
        for v in &per_action {
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: v.len(),
                });
            }
            data.extend_from_slice(v);
        }
        Ok(Self { dim, data })
    }

    fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len() % dim, 0);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn action_count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn action(&self, a: usize) -> &[f64] {
        &self.data[a * self.dim..(a + 1) * self.dim]
    }

    /// Little-endian f64 bytes of every action vector, hex encoded.
    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        hex::encode(bytes)
    }

    pub fn from_hex(blob: &str, action_count: usize) -> Result<Self> {
        let bytes = hex::decode(blob).map_err(|e| Error::input(format!("bad feature blob: {e}")))?;
        if bytes.len() % 8 != 0 || action_count == 0 {
            return Err(Error::input("feature blob length is not a whole number of f64 values"));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        if action_count == 0 || !data.len().is_multiple_of(action_count) || data.is_empty() {
            return Err(Error::input("feature blob does not split evenly across actions"));
        }
        Ok(Self::from_flat(data.len() / action_count, data))
    }
}

/// A state as seen by learners: an index into a finite state space or the
/// feature vectors of every action.
#[derive(Clone, Debug, PartialEq)]
pub enum StateHandle {
    Tabular(usize),
    Features(Arc<FeatureState>),
}

impl StateHandle {
    pub fn tabular_index(&self) -> Option<usize> {
        match self {
            StateHandle::Tabular(i) => Some(*i),
            StateHandle::Features(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TabularModel {
    pub state_distribution: Vec<f64>,
    /// `means[x][a] = f(x, a)`.
    pub means: Vec<Vec<f64>>,
}

impl TabularModel {
    pub fn state_count(&self) -> usize {
        self.means.len()
    }

    fn sample_state(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.state_distribution.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.state_distribution.len() - 1
    }
}

/// Gaussian features `φ(x, a) ~ N(0, Σ_a)` per action with mean reward
/// `⟨φ(x, a), θ_true⟩`.
#[derive(Clone, Debug)]
pub struct GaussianModel {
    pub ambient_dim: usize,
    pub true_dim: usize,
    pub covariances: Vec<Matrix<f64>>,
    pub theta_true: Vec<f64>,
    factors: Vec<Cholesky<f64>>,
}

impl GaussianModel {
    pub fn new(covariances: Vec<Matrix<f64>>, theta_true: Vec<f64>, true_dim: usize) -> Result<Self> {
        let ambient_dim = theta_true.len();
        if true_dim == 0 || true_dim > ambient_dim {
            return Err(Error::input(format!(
                "true_dim {true_dim} must lie in 1..={ambient_dim}"
            )));
        }
        if theta_true[true_dim..].iter().any(|&t| t != 0.0) {
            return Err(Error::input("theta_true must vanish beyond true_dim"));
        }
        let factors = covariances
            .iter()
            .map(|c| {
                if c.rows() != ambient_dim || !c.is_square() {
                    return Err(Error::Dimension {
                        expected: ambient_dim,
                        found: c.rows(),
                    });
                }
                Cholesky::factor(c, 1e-12)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ambient_dim,
            true_dim,
            covariances,
            theta_true,
            factors,
        })
    }

    fn sample_action_features(&self, a: usize, rng: &mut Rng, out: &mut [f64]) {
        let z: Vec<f64> = (0..self.ambient_dim).map(|_| StandardNormal.sample(rng)).collect();
        let l = self.factors[a].lower();
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&l.row(i)[..=i], &z[..=i]);
        }
    }

    fn sample_state(&self, rng: &mut Rng) -> FeatureState {
        let d = self.ambient_dim;
        let mut data = vec![0.0; d * self.covariances.len()];
        for (a, chunk) in data.chunks_exact_mut(d).enumerate() {
            self.sample_action_features(a, rng, chunk);
        }
        FeatureState::from_flat(d, data)
    }
}

#[derive(Clone, Debug)]
pub enum StateModel {
    Tabular(TabularModel),
    GaussianFeatures(GaussianModel),
}

#[derive(Clone, Debug)]
pub struct BanditInstance {
    pub action_count: usize,
    pub state_model: StateModel,
    /// Standard deviation of the additive Gaussian reward noise.
    pub noise_scale: f64,
}

impl BanditInstance {
    pub fn tabular(state_distribution: Vec<f64>, means: Vec<Vec<f64>>, noise_scale: f64) -> Result<Self> {
        let state_count = means.len();
        if state_count == 0 || state_distribution.len() != state_count {
            return Err(Error::input("state distribution must cover every state"));
        }
        let action_count = means[0].len();
        if action_count == 0 || means.iter().any(|r| r.len() != action_count) {
            return Err(Error::input("mean table must be rectangular with at least one action"));
        }
        if means.iter().flatten().any(|f| !(-1.0..=1.0).contains(f)) {
            return Err(Error::input("mean rewards must lie in [-1, 1]"));
        }
        let total: f64 = state_distribution.iter().sum();
        if state_distribution.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::input("state distribution must be a probability vector"));
        }
        if !(noise_scale >= 0.0) {
            return Err(Error::input("noise scale must be nonnegative"));
        }
        Ok(Self {
            action_count,
            state_model: StateModel::Tabular(TabularModel {
                state_distribution,
                means,
            }),
            noise_scale,
        })
    }

    pub fn gaussian(model: GaussianModel, noise_scale: f64) -> Result<Self> {
        if model.covariances.is_empty() {
            return Err(Error::input("need at least one action"));
        }
        Ok(Self {
            action_count: model.covariances.len(),
            state_model: StateModel::GaussianFeatures(model),
            noise_scale,
        })
    }

    pub fn with_noise_scale(mut self, noise_scale: f64) -> Self {
        self.noise_scale = noise_scale;
        self
    }

    /// Number of states for finite state spaces.
    pub fn state_count(&self) -> Option<usize> {
        match &self.state_model {
            StateModel::Tabular(t) => Some(t.state_count()),
            StateModel::GaussianFeatures(_) => None,
        }
    }

    pub fn as_tabular(&self) -> Option<&TabularModel> {
        match &self.state_model {
            StateModel::Tabular(t) => Some(t),
            StateModel::GaussianFeatures(_) => None,
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianModel> {
        match &self.state_model {
            StateModel::GaussianFeatures(g) => Some(g),
            StateModel::Tabular(_) => None,
        }
    }

    /// `f(x, a)`.
    pub fn mean_reward(&self, state: &StateHandle, action: usize) -> Result<f64> {
        if action >= self.action_count {
            return Err(Error::input(format!("action {action} out of range")));
        }
        match (&self.state_model, state) {
            (StateModel::Tabular(t), StateHandle::Tabular(x)) => t
                .means
                .get(*x)
                .map(|row| row[action])
                .ok_or_else(|| Error::input(format!("state {x} out of range"))),
            (StateModel::GaussianFeatures(g), StateHandle::Features(fs)) => {
                if fs.dim() != g.ambient_dim || fs.action_count() != self.action_count {
                    return Err(Error::RepresentationMismatch(
                        "feature state shape differs from instance",
                    ));
                }
                Ok(dot(fs.action(action), &g.theta_true))
            }
            _ => Err(Error::RepresentationMismatch("state kind differs from instance kind")),
        }
    }

    /// `argmax_a f(x, a)`, lowest index on ties.
    pub fn optimal_action(&self, state: &StateHandle) -> Result<usize> {
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..self.action_count {
            let v = self.mean_reward(state, a)?;
            if v > best.1 {
                best = (a, v);
            }
        }
        Ok(best.0)
    }

    fn sample_state(&self, rng: &mut Rng) -> StateHandle {
        match &self.state_model {
            StateModel::Tabular(t) => StateHandle::Tabular(t.sample_state(rng)),
            StateModel::GaussianFeatures(g) => StateHandle::Features(Arc::new(g.sample_state(rng))),
        }
    }
}

/// State-independent stochastic behavior policy `µ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicy {
    action_probs: Vec<f64>,
}

impl BehaviorPolicy {
    pub fn new(action_probs: Vec<f64>) -> Result<Self> {
        if action_probs.is_empty() {
            return Err(Error::input("behavior policy needs at least one action"));
        }
        if let Some(a) = action_probs.iter().position(|&p| !(p > 0.0)) {
            return Err(Error::InfiniteCoverage(a));
        }
        let total: f64 = action_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("action probabilities sum to {total}, not 1")));
        }
        Ok(Self { action_probs })
    }

    pub fn uniform(action_count: usize) -> Result<Self> {
        Self::new(vec![1.0 / action_count as f64; action_count.max(1)])
    }

    pub fn probs(&self) -> &[f64] {
        &self.action_probs
    }

    pub fn action_count(&self) -> usize {
        self.action_probs.len()
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, &p) in self.action_probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        self.action_probs.len() - 1
    }
}

/// Concentrability `C(µ) = sup π(a|x)/µ(a|x) = 1 / min_a µ(a)` for a
/// state-independent `µ`.
pub fn concentrability(mu: &BehaviorPolicy) -> Result<f64> {
    let (a, min) =
        mu.probs().iter().copied().enumerate().fold(
            (0, f64::INFINITY),
            |(ba, bm), (a, p)| if p < bm { (a, p) } else { (ba, bm) },
        );
    if !(min > 0.0) {
        return Err(Error::InfiniteCoverage(a));
    }
    Ok(1.0 / min)
}

/// Draws action probabilities from a flat Dirichlet(1, …, 1).
pub fn dirichlet_behavior(action_count: usize, seed: u64) -> Result<BehaviorPolicy> {
    if action_count < 2 {
        return Err(Error::input("a Dirichlet behavior policy needs at least two actions"));
    }
    let mut rng = stream(seed, "dirichlet-behavior", 0);
    loop {
        let g: Vec<f64> = (0..action_count).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = g.iter().sum();
        let mut probs: Vec<f64> = g.iter().map(|v| v / total).collect();
        if probs.iter().all(|&p| p > 0.0) {
            // Push the round-off into the largest entry so the sum is 1.
            let drift = 1.0 - probs.iter().sum::<f64>();
            let imax = (0..action_count).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
            probs[imax] += drift;
            return BehaviorPolicy::new(probs);
        }
    }
}

/// Random tabular instance: standard normal means rescaled to `max |f| = 1`,
/// uniform states, unit noise.
pub fn make_tabular_instance(state_count: usize, action_count: usize, seed: u64) -> Result<BanditInstance> {
    if state_count == 0 || action_count == 0 {
        return Err(Error::input("state and action counts must be positive"));
    }
    let mut rng = stream(seed, "tabular-means", 0);
    let mut means: Vec<Vec<f64>> = (0..state_count)
        .map(|_| (0..action_count).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let max = means.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        for v in means.iter_mut().flatten() {
            *v /= max;
        }
    }
    BanditInstance::tabular(vec![1.0 / state_count as f64; state_count], means, 1.0)
}

/// Pairs sampled when calibrating the scale of `θ_true`.
pub const GAUSSIAN_CALIBRATION_SAMPLES: usize = 10_000;
/// Quantile of `|⟨φ, θ_true⟩|` pinned to 1 by the calibration.
pub const GAUSSIAN_CALIBRATION_QUANTILE: f64 = 0.99;

/// Gaussian-feature instance. `Σ_a = G Gᵀ/d + 0.1 I` with `G` standard
/// normal; `θ_true` is standard normal on the first `true_dim` coordinates and
/// scaled so the 0.99 quantile of `|⟨φ, θ_true⟩|` over sampled pairs is 1.
pub fn make_gaussian_instance(
    ambient_dim: usize,
    true_dim: usize,
    action_count: usize,
    seed: u64,
) -> Result<BanditInstance> {
    if action_count == 0 {
        return Err(Error::input("action count must be positive"));
    }
    if true_dim == 0 || true_dim > ambient_dim {
        return Err(Error::input(format!(
            "true_dim {true_dim} must lie in 1..=ambient_dim ({ambient_dim})"
        )));
    }
    let d = ambient_dim;
    let mut rng = stream(seed, "gaussian-covariances", 0);
    let covariances: Vec<Matrix<f64>> = (0..action_count)
        .map(|_| {
            let g = Matrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
            let mut s = g.matmul(&g.transpose()).expect("square");
            s.scale(1.0 / d as f64);
            s.add_diagonal(0.1);
            s.symmetrize();
            s
        })
        .collect();

    let mut rng = stream(seed, "gaussian-theta", 0);
    let mut theta: Vec<f64> = (0..d)
        .map(|j| {
            if j < true_dim {
                StandardNormal.sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    let model = GaussianModel::new(covariances, theta.clone(), true_dim)?;

    let mut rng = stream(seed, "gaussian-calibration", 0);
    let mut buf = vec![0.0; d];
    let mut mags: Vec<f64> = (0..GAUSSIAN_CALIBRATION_SAMPLES)
        .map(|_| {
            let a = rng.random_range(0..action_count);
            model.sample_action_features(a, &mut rng, &mut buf);
            dot(&buf, &theta).abs()
        })
        .collect();
    mags.sort_by(f64::total_cmp);
    let idx = ((GAUSSIAN_CALIBRATION_QUANTILE * mags.len() as f64).ceil() as usize).clamp(1, mags.len()) - 1;
    let q = mags[idx];
    if q > 0.0 {
        for t in &mut theta {
            *t /= q;
        }
    }
    let model = GaussianModel {
        theta_true: theta,
        ..model
    };
    BanditInstance::gaussian(model, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataRow {
    pub state: StateHandle,
    pub action: usize,
    pub reward: f64,
}

/// A logged batch `{(xᵢ, aᵢ, yᵢ)}`, optionally with the true means `f(xᵢ, aᵢ)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<DataRow>,
    pub true_means: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(rows: Vec<DataRow>, true_means: Option<Vec<f64>>, action_count: usize) -> Result<Self> {
        if let Some(m) = &true_means {
            if m.len() != rows.len() {
                return Err(Error::Dimension {
                    expected: rows.len(),
                    found: m.len(),
                });
            }
        }
        for r in &rows {
            if r.action >= action_count {
                return Err(Error::input(format!("action {} out of range", r.action)));
            }
            if !r.reward.is_finite() {
                return Err(Error::input("rewards must be finite"));
            }
        }
        Ok(Self { rows, true_means })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows selected by `indices`, carrying the matching true means.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            true_means: self
                .true_means
                .as_ref()
                .map(|m| indices.iter().map(|&i| m[i]).collect()),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["state_id_or_blob", "action", "reward", "true_mean"])?;
        for (i, r) in self.rows.iter().enumerate() {
            let state = match &r.state {
                StateHandle::Tabular(x) => x.to_string(),
                StateHandle::Features(fs) => fs.to_hex(),
            };
            let mean = self
                .true_means
                .as_ref()
                .map(|m| format!("{:?}", m[i]))
                .unwrap_or_default();
            w.write_record([state, r.action.to_string(), format!("{:?}", r.reward), mean])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`Dataset::write_csv`]. Integer state cells
    /// are tabular indices; anything else is a feature blob.
    pub fn read_csv<R: Read>(reader: R, action_count: usize) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        let mut means = Vec::new();
        let mut all_means = true;
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::input("dataset rows need four columns"));
            }
            let state = match rec[0].parse::<usize>() {
                Ok(x) => StateHandle::Tabular(x),
                Err(_) => StateHandle::Features(Arc::new(FeatureState::from_hex(&rec[0], action_count)?)),
            };
            let action = rec[1].parse().map_err(|_| Error::input("bad action cell"))?;
            let reward = rec[2].parse().map_err(|_| Error::input("bad reward cell"))?;
            if rec[3].is_empty() {
                all_means = false;
            } else {
                means.push(rec[3].parse().map_err(|_| Error::input("bad true_mean cell"))?);
            }
            rows.push(DataRow { state, action, reward });
        }
        let true_means = if all_means && means.len() == rows.len() {
            Some(means)
        } else {
            None
        };
        Dataset::new(rows, true_means, action_count)
    }
}

/// Logs `n` rows under `µ`. States, actions and reward noise come from three
/// separate streams, so actions never influence the noise draws.
pub fn sample_dataset(instance: &BanditInstance, mu: &BehaviorPolicy, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::input("dataset size must be positive"));
    }
    if mu.action_count() != instance.action_count {
        return Err(Error::Dimension {
            expected: instance.action_count,
            found: mu.action_count(),
        });
    }
    let mut state_rng = stream(seed, "dataset-states", 0);
    let mut action_rng = stream(seed, "dataset-actions", 0);
    let states: Vec<StateHandle> = (0..n).map(|_| instance.sample_state(&mut state_rng)).collect();
    let actions: Vec<usize> = (0..n).map(|_| mu.sample(&mut action_rng)).collect();
    observe(instance, states.into_iter().zip(actions), seed)
}

/// Logs rewards for a fixed design of (state, action) pairs.
pub fn sample_fixed_design(
    instance: &BanditInstance,
    design: impl IntoIterator<Item = (StateHandle, usize)>,
    seed: u64,
) -> Result<Dataset> {
    observe(instance, design, seed)
}

fn observe(
    instance: &BanditInstance,
    design: impl IntoIterator<Item = (StateHandle, usize)>,
    seed: u64,
) -> Result<Dataset> {
    let mut noise_rng = stream(seed, "dataset-noise", 0);
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for (state, action) in design {
        let f = instance.mean_reward(&state, action)?;
        let eta: f64 = StandardNormal.sample(&mut noise_rng);
        rows.push(DataRow {
            state,
            action,
            reward: f + instance.noise_scale * eta,
        });
        means.push(f);
    }
    Dataset::new(rows, Some(means), instance.action_count)
}

/// I.i.d. unlabeled states.
pub fn sample_states(instance: &BanditInstance, count: usize, seed: u64) -> Result<Vec<StateHandle>> {
    if count == 0 {
        return Err(Error::input("state count must be positive"));
    }
    let mut rng = stream(seed, "states", 0);
    Ok((0..count).map(|_| instance.sample_state(&mut rng)).collect())
}
