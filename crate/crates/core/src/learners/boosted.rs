//! Stagewise logistic gradient boosting with regression trees.
//!
//! Each stage fits a least-squares tree to the residuals `y - p` on a seeded
//! row subsample; leaf outputs are the Newton step `sum(r) / sum(p (1 - p))`
//! and are scaled by the learning rate. Multiclass problems train one binary
//! booster per class and normalise the per-class probabilities.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, DecisionTree, Presorted, Target, TreeParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_stages: usize,
    pub eta: f64,
    pub subsample: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { n_stages: 100, eta: 0.2, subsample: 0.5, max_depth: 4, min_samples_leaf: 1 }
    }
}

/// One logistic booster: `score(x) = initial + eta * sum(stage trees)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryBooster {
    pub initial_score: f64,
    pub stages: Vec<DecisionTree>,
    pub eta: f64,
}

impl BinaryBooster {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.initial_score + self.eta * self.stages.iter().map(|t| t.leaf_value(x)[0]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    /// One booster for binary problems (positive class 1), one per class otherwise.
    pub boosters: Vec<BinaryBooster>,
    pub n_classes: usize,
    pub n_features: usize,
    pub params: BoostParams,
    pub seed: u64,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn fit_binary(
    x: &Matrix,
    presorted: &Presorted,
    target: &[f64],
    params: &BoostParams,
    seed: u64,
    stream: u64,
) -> BinaryBooster {
    let n = x.n_rows();
    let prior = (target.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let initial_score = (prior / (1.0 - prior)).ln();
    let mut score = vec![initial_score; n];
    let mut residual = vec![0.0; n];
    let mut hessian = vec![0.0; n];
    let tree_params = TreeParams { max_depth: params.max_depth, min_samples_leaf: params.min_samples_leaf, max_features: None };
    let take = ((params.subsample * n as f64).round() as usize).clamp(1, n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut stages = Vec::with_capacity(params.n_stages);
    for _ in 0..params.n_stages {
        for i in 0..n {
            let p = sigmoid(score[i]);
            residual[i] = target[i] - p;
            hessian[i] = p * (1.0 - p);
        }
        let mut rows = if take < n { sample(&mut rng, n, take).into_vec() } else { (0..n).collect() };
        rows.sort_unstable();
        let tree = grow(x, &rows, presorted, Target::Gradient { residual: &residual, hessian: &hessian }, &tree_params, None);
        for (i, s) in score.iter_mut().enumerate() {
            *s += params.eta * tree.leaf_value(x.row(i))[0];
        }
        stages.push(tree);
    }
    BinaryBooster { initial_score, stages, eta: params.eta }
}

pub fn fit_boosted(x: &Matrix, y: &[usize], n_classes: usize, params: &BoostParams, seed: u64) -> Result<BoostedModel> {
    if x.is_empty() {
        return Err(Error::Empty("training matrix"));
    }
    if y.len() != x.n_rows() {
        return Err(Error::InvalidInput(format!("{} labels for {} rows", y.len(), x.n_rows())));
    }
    if n_classes < 2 {
        return Err(Error::InvalidInput("boosting needs at least two classes".into()));
    }
    if !(params.subsample > 0.0 && params.subsample <= 1.0) {
        return Err(Error::InvalidInput(format!("subsample {} outside (0, 1]", params.subsample)));
    }
    let presorted = Presorted::new(x);
    let boosters = if n_classes == 2 {
        let t: Vec<f64> = y.iter().map(|&c| f64::from(u8::from(c == 1))).collect();
        vec![fit_binary(x, &presorted, &t, params, seed, 0)]
    } else {
        (0..n_classes)
            .into_par_iter()
            .map(|k| {
                let t: Vec<f64> = y.iter().map(|&c| f64::from(u8::from(c == k))).collect();
                fit_binary(x, &presorted, &t, params, seed, k as u64)
            })
            .collect()
    };
    Ok(BoostedModel { boosters, n_classes, n_features: x.n_cols(), params: *params, seed })
}

impl BoostedModel {
    pub fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        if self.n_classes == 2 {
            let p = sigmoid(self.boosters[0].score(x));
            return vec![1.0 - p, p];
        }
        let mut p: Vec<f64> = self.boosters.iter().map(|b| sigmoid(b.score(x))).collect();
        let total: f64 = p.iter().sum();
        if total > 0.0 {
            p.iter_mut().for_each(|v| *v /= total);
        } else {
            p.fill(1.0 / self.n_classes as f64);
        }
        p
    }
}
