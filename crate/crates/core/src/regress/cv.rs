use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, predict_all, Dataset, RegressorSpec, Variant};
use crate::error::{Error, Result};
use crate::evalkit::rmse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub variants: Vec<Variant>,
    pub rmse: Vec<f64>,
    /// Held-out predictions per variant, in dataset row order.
    pub predictions: Vec<Vec<f64>>,
    pub folds: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl CvReport {
    pub fn rmse_of(&self, v: Variant) -> Option<f64> {
        self.variants
            .iter()
            .position(|&u| u == v)
            .map(|i| self.rmse[i])
    }
}

/// Seeded permutation dealt round-robin into `k` folds.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!(
            "cross-validation needs k ≥ 2, got {k}"
        )));
    }
    if n < k {
        return Err(Error::Config(format!("{n} samples cannot fill {k} folds")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        folds[row] = pos % k;
    }
    Ok(folds)
}

/// k-fold cross-validation of each spec on a shared fold assignment.
/// Specs run in parallel; results keep the input order.
pub fn cross_validate(
    ds: &Dataset,
    specs: &[RegressorSpec],
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let folds = fold_assignment(ds.len(), k, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..ds.len()).partition(|&i| folds[i] == f);
            (train, test)
        })
        .collect();
    let per_spec: Vec<Result<Vec<f64>>> = specs
        .par_iter()
        .map(|spec| {
            let mut pred = vec![0.0; ds.len()];
            for (train, test) in &splits {
                let model = fit(&ds.subset(train), spec, seed)?;
                let test_x: Vec<Vec<f64>> = test.iter().map(|&i| ds.x[i].clone()).collect();
                for (&i, v) in test.iter().zip(predict_all(&model, &test_x)?) {
                    pred[i] = v;
                }
            }
            Ok(pred)
        })
        .collect();
    let predictions = per_spec.into_iter().collect::<Result<Vec<_>>>()?;
    let rmse = predictions
        .iter()
        .map(|p| rmse(p, &ds.y))
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport {
        variants: specs.iter().map(|s| s.variant).collect(),
        rmse,
        predictions,
        folds,
        k,
        seed,
    })
}
