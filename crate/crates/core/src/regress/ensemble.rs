use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Tree, TreeParams};
use super::{RegressorSpec, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Boosted,
    Bagged,
}

/// Boosted: `init + rate · Σ trees`. Bagged: mean of trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub init: f64,
    pub learn_rate: f64,
    pub trees: Vec<Tree>,
}

impl Ensemble {
    pub fn predict(&self, z: &[f64]) -> f64 {
        self.predict_first(z, self.trees.len())
    }

    /// Prediction using only the first `m` members.
    pub fn predict_first(&self, z: &[f64], m: usize) -> f64 {
        let members = &self.trees[..m.min(self.trees.len())];
        match self.kind {
            EnsembleKind::Boosted => {
                self.init + self.learn_rate * members.iter().map(|t| t.predict(z)).sum::<f64>()
            }
            EnsembleKind::Bagged => {
                if members.is_empty() {
                    return self.init;
                }
                members.iter().map(|t| t.predict(z)).sum::<f64>() / members.len() as f64
            }
        }
    }
}

pub(crate) const DEFAULT_TREES: usize = 30;
pub(crate) const DEFAULT_LEARN_RATE: f64 = 0.1;
pub(crate) const DEFAULT_MIN_LEAF: usize = 8;

fn count(spec: &RegressorSpec, key: &str, default: usize) -> Result<usize> {
    match spec.get(key) {
        None => Ok(default),
        Some(v) if v >= 1.0 && v.fract() == 0.0 => Ok(v as usize),
        Some(v) => Err(Error::Config(format!(
            "{key} must be a positive integer, got {v}"
        ))),
    }
}

pub(crate) fn fit_ensemble(
    z: &[Vec<f64>],
    y: &[f64],
    spec: &RegressorSpec,
    seed: u64,
) -> Result<Ensemble> {
    let n_trees = count(spec, "n_trees", DEFAULT_TREES)?;
    let min_leaf = count(spec, "min_leaf", DEFAULT_MIN_LEAF)?;
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    match spec.variant {
        Variant::BoostedTrees => {
            let learn_rate = spec.get("learn_rate").unwrap_or(DEFAULT_LEARN_RATE);
            if !(0.0..=1.0).contains(&learn_rate) {
                return Err(Error::Config(format!(
                    "learn_rate must lie in [0, 1], got {learn_rate}"
                )));
            }
            let rows: Vec<usize> = (0..n).collect();
            let params = TreeParams {
                min_leaf,
                max_features: None,
            };
            let mut fitted = vec![mean; n];
            let mut trees = Vec::with_capacity(n_trees);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..n_trees {
                let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
                let t = grow(z, &resid, &rows, params, &mut rng);
                for (f, r) in fitted.iter_mut().zip(z) {
                    *f += learn_rate * t.predict(r);
                }
                trees.push(t);
            }
            Ok(Ensemble {
                kind: EnsembleKind::Boosted,
                init: mean,
                learn_rate,
                trees,
            })
        }
        Variant::BaggedTrees => {
            let p = z[0].len();
            let params = TreeParams {
                min_leaf,
                max_features: Some(p.div_ceil(3)),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let trees = (0..n_trees)
                .map(|_| {
                    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    grow(z, y, &rows, params, &mut rng)
                })
                .collect();
            Ok(Ensemble {
                kind: EnsembleKind::Bagged,
                init: mean,
                learn_rate: 1.0,
                trees,
            })
        }
        other => Err(Error::Config(format!("{other} is not an ensemble model"))),
    }
}
