use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, DecisionTree, Presorted, Target, TreeParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    /// Draw `floor(sqrt(d))` candidate features per split; otherwise scan all.
    pub sqrt_features: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_estimators: 70, max_depth: 12, min_samples_leaf: 2, bootstrap: true, sqrt_features: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
    pub n_features: usize,
    pub params: ForestParams,
    pub seed: u64,
}

pub fn fit_forest(x: &Matrix, y: &[usize], n_classes: usize, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if x.is_empty() {
        return Err(Error::Empty("training matrix"));
    }
    if y.len() != x.n_rows() {
        return Err(Error::InvalidInput(format!("{} labels for {} rows", y.len(), x.n_rows())));
    }
    if params.n_estimators == 0 {
        return Err(Error::InvalidInput("n_estimators must be positive".into()));
    }
    let d = x.n_cols();
    let max_features = params.sqrt_features.then(|| ((d as f64).sqrt().floor() as usize).max(1));
    let tree_params = TreeParams { max_depth: params.max_depth, min_samples_leaf: params.min_samples_leaf, max_features };
    let presorted = Presorted::new(x);
    let n = x.n_rows();

    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let samples: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(x, &samples, &presorted, Target::Class { y, n_classes }, &tree_params, Some(&mut rng))
        })
        .collect();
    Ok(ForestModel { trees, n_classes, n_features: d, params: *params, seed })
}

impl ForestModel {
    /// Average of the trees' leaf class distributions.
    pub fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.leaf_value(x)) {
                *acc += v;
            }
        }
        let k = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= k);
        p
    }
}
