//! Linear model classes `F_k = {(x, a) ↦ ⟨φ_k(x, a), θ⟩}` and their feature
//! maps.

use std::io::{Read, Write};

use rand_distr::{Distribution, StandardNormal};

use crate::environment::{BanditInstance, StateHandle};
use crate::error::{Error, Result};
use crate::numerics::{dot, Cholesky, Matrix};
use crate::rng::stream;

/// Residual allowed when certifying that a constructed class is realizable.
pub const REALIZABILITY_TOL: f64 = 1e-8;
pub const DEFAULT_HIDDEN_DIMS: [usize; 5] = [2, 5, 10, 25, 50];
pub const DEFAULT_TRUNCATION_DIMS: [usize; 6] = [15, 20, 30, 50, 75, 100];
pub const DEFAULT_PROBE_COUNT: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureMap {
    /// One stored vector per (state, action), row-major in `state * |A| + action`.
    Tabular { action_count: usize, table: Vec<f64> },
    /// Keeps the leading coordinates of an ambient feature vector.
    Truncation { ambient_dim: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelClass {
    dim: usize,
    map: FeatureMap,
}

impl ModelClass {
    /// Tabular class from `vectors[state][action]`.
    pub fn tabular(vectors: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let action_count = vectors.first().map_or(0, Vec::len);
        let dim = vectors.first().and_then(|s| s.first()).map_or(0, Vec::len);
        if action_count == 0 || dim == 0 {
            return Err(Error::input(
                "tabular map needs states, actions and a positive dimension",
            ));
        }
        let mut table = Vec::with_capacity(vectors.len() * action_count * dim);
        for per_state in &vectors {
            if per_state.len() != action_count {
                return Err(Error::input("tabular map must cover every (state, action) pair"));
            }
            for v in per_state {
                if v.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        found: v.len(),
                    });
                }
                table.extend_from_slice(v);
            }
        }
        Ok(Self {
            dim,
            map: FeatureMap::Tabular { action_count, table },
        })
    }

    pub fn truncation(dim: usize, ambient_dim: usize) -> Result<Self> {
        if dim == 0 || dim > ambient_dim {
            return Err(Error::input(format!(
                "truncation dim {dim} must lie in 1..={ambient_dim}"
            )));
        }
        Ok(Self {
            dim,
            map: FeatureMap::Truncation { ambient_dim },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    /// Number of states covered by a tabular map.
    pub fn state_count(&self) -> Option<usize> {
        match &self.map {
            FeatureMap::Tabular { action_count, table } => Some(table.len() / (action_count * self.dim)),
            FeatureMap::Truncation { .. } => None,
        }
    }

    /// `φ_k(x, a)`.
    pub fn features<'a>(&'a self, state: &'a StateHandle, action: usize) -> Result<&'a [f64]> {
        match (&self.map, state) {
            (FeatureMap::Tabular { action_count, table }, StateHandle::Tabular(x)) => {
                if action >= *action_count {
                    return Err(Error::input(format!("action {action} out of range")));
                }
                let start = (x * action_count + action) * self.dim;
                table
                    .get(start..start + self.dim)
                    .ok_or_else(|| Error::input(format!("state {x} out of range")))
            }
            (FeatureMap::Truncation { ambient_dim }, StateHandle::Features(fs)) => {
                if fs.dim() != *ambient_dim {
                    return Err(Error::RepresentationMismatch("ambient dimension differs from the map"));
                }
                if action >= fs.action_count() {
                    return Err(Error::input(format!("action {action} out of range")));
                }
                Ok(&fs.action(action)[..self.dim])
            }
            (FeatureMap::Tabular { .. }, StateHandle::Features(_)) => {
                Err(Error::RepresentationMismatch("tabular map given a feature state"))
            }
            (FeatureMap::Truncation { .. }, StateHandle::Tabular(_)) => {
                Err(Error::RepresentationMismatch("truncation map given a tabular state"))
            }
        }
    }

    /// Writes `state, action, f0, …` rows for a tabular map.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let FeatureMap::Tabular { action_count, table } = &self.map else {
            return Err(Error::Unsupported("only tabular maps serialize to CSV"));
        };
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["state".to_string(), "action".to_string()];
        header.extend((0..self.dim).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for (i, v) in table.chunks_exact(self.dim).enumerate() {
            let mut rec = vec![(i / action_count).to_string(), (i % action_count).to_string()];
            rec.extend(v.iter().map(|x| format!("{x:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let mut cells: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let x = rec[0].parse().map_err(|_| Error::input("bad state cell"))?;
            let a = rec[1].parse().map_err(|_| Error::input("bad action cell"))?;
            let v = rec
                .iter()
                .skip(2)
                .map(|c| c.parse::<f64>().map_err(|_| Error::input("bad feature cell")))
                .collect::<Result<Vec<_>>>()?;
            cells.push((x, a, v));
        }
        let states = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
        let actions = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
        let mut grid: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; actions]; states];
        for (x, a, v) in cells {
            grid[x][a] = Some(v);
        }
        let vectors = grid
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::input("tabular map CSV misses a (state, action) pair"))?;
        Self::tabular(vectors)
    }
}

pub fn evaluate_features<'a>(class: &'a ModelClass, state: &'a StateHandle, action: usize) -> Result<&'a [f64]> {
    class.features(state, action)
}

/// One realizable class per hidden dimension.
///
/// For `d_hid`, draws `d_hid − 1` standard normal vectors over the flattened
/// (state, action) grid and sets the last one so the vectors sum to `f`. The
/// hidden features are lifted to `|X||A|` dimensions by a standard normal
/// matrix. Realizability is certified before returning.
pub fn realizable_family(instance: &BanditInstance, hidden_dims: &[usize], seed: u64) -> Result<Vec<ModelClass>> {
    let tab = instance
        .as_tabular()
        .ok_or(Error::Unsupported("realizable family needs a tabular instance"))?;
    let (states, actions) = (tab.state_count(), instance.action_count);
    let pairs = states * actions;
    let target: Vec<f64> = tab.means.iter().flatten().copied().collect();

    hidden_dims
        .iter()
        .enumerate()
        .map(|(k, &d_hid)| {
            if d_hid == 0 {
                return Err(Error::input("hidden dimensions must be positive"));
            }
            let mut rng = stream(seed, "realizable-family", k as u64);
            // hidden[p][j] = v_j at pair p
            let mut hidden = Matrix::zeros(pairs, d_hid);
            for j in 0..d_hid - 1 {
                for p in 0..pairs {
                    hidden[(p, j)] = StandardNormal.sample(&mut rng);
                }
            }
            for p in 0..pairs {
                let partial: f64 = hidden.row(p)[..d_hid - 1].iter().sum();
                hidden[(p, d_hid - 1)] = target[p] - partial;
            }
            let lift = Matrix::from_fn(pairs, d_hid, |_, _| StandardNormal.sample(&mut rng));
            // φ(p) = lift · h(p)
            let features = hidden.matmul(&lift.transpose())?;
            certify_realizable(&features, &lift, &target)?;

            let vectors = (0..states)
                .map(|x| (0..actions).map(|a| features.row(x * actions + a).to_vec()).collect())
                .collect();
            ModelClass::tabular(vectors)
        })
        .collect()
}

/// With `φ = L h` and `⟨h, 1⟩ = f`, the parameter `θ = L (LᵀL)⁻¹ 1` satisfies
/// `⟨φ, θ⟩ = f`. Checks that residual on every pair.
fn certify_realizable(features: &Matrix<f64>, lift: &Matrix<f64>, target: &[f64]) -> Result<()> {
    let gram = lift.gram();
    let chol = Cholesky::factor(&gram, 1e-12).map_err(|_| Error::Realizability(f64::INFINITY))?;
    let coef = chol.solve(&vec![1.0; lift.cols()])?;
    let theta = lift.matvec(&coef)?;
    let residual = features
        .row_iter()
        .zip(target)
        .map(|(phi, &f)| (dot(phi, &theta) - f).abs())
        .fold(0.0, f64::max);
    if residual > REALIZABILITY_TOL {
        return Err(Error::Realizability(residual));
    }
    Ok(())
}

/// Prefix truncations of an ambient feature vector; nested by construction.
pub fn truncation_family(ambient_dim: usize, dims: &[usize]) -> Result<Vec<ModelClass>> {
    if dims.is_empty() {
        return Err(Error::input("need at least one truncation dimension"));
    }
    if dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("truncation dimensions must be strictly ascending"));
    }
    dims.iter().map(|&d| ModelClass::truncation(d, ambient_dim)).collect()
}

/// Whether each class's features are a prefix of the next one's. Tabular
/// maps are compared on every pair; feature maps on up to `probe_count`
/// (state, action) pairs from `probe_states`.
pub fn check_nested(classes: &[ModelClass], probe_states: &[StateHandle], probe_count: usize) -> bool {
    classes
        .windows(2)
        .all(|w| pair_nested(&w[0], &w[1], probe_states, probe_count))
}

fn pair_nested(small: &ModelClass, big: &ModelClass, probe_states: &[StateHandle], probe_count: usize) -> bool {
    if small.dim > big.dim {
        return false;
    }
    match (&small.map, &big.map) {
        (
            FeatureMap::Tabular {
                action_count: a1,
                table: t1,
            },
            FeatureMap::Tabular {
                action_count: a2,
                table: t2,
            },
        ) => {
            if a1 != a2 || small.state_count() != big.state_count() {
                return false;
            }
            t1.chunks_exact(small.dim)
                .zip(t2.chunks_exact(big.dim))
                .all(|(u, v)| u == &v[..small.dim])
        }
        (FeatureMap::Truncation { ambient_dim: d1 }, FeatureMap::Truncation { ambient_dim: d2 }) => {
            if d1 != d2 {
                return false;
            }
            probe_states
                .iter()
                .flat_map(|s| {
                    let actions = match s {
                        StateHandle::Features(fs) => fs.action_count(),
                        StateHandle::Tabular(_) => 0,
                    };
                    (0..actions).map(move |a| (s, a))
                })
                .take(probe_count)
                .all(|(s, a)| match (small.features(s, a), big.features(s, a)) {
                    (Ok(u), Ok(v)) => u == &v[..small.dim],
                    _ => false,
                })
        }
        _ => false,
    }
}
