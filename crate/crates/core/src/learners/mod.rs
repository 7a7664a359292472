//! Tree ensembles written from scratch: Gini CART, random forest and logistic
//! gradient boosting, plus permutation importance.

mod boosted;
mod forest;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use boosted::{fit_boosted, sigmoid, BinaryBooster, BoostParams, BoostedModel};
pub use forest::{fit_forest, ForestModel, ForestParams};
pub use tree::{fit_tree, DecisionTree, Node, TreeParams};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Serialized model format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    RandomForest(ForestParams),
    Boosted(BoostParams),
}

impl ModelSpec {
    pub fn rf() -> Self {
        ModelSpec::RandomForest(ForestParams::default())
    }

    pub fn xgb() -> Self {
        ModelSpec::Boosted(BoostParams::default())
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            ModelSpec::RandomForest(_) => "RF",
            ModelSpec::Boosted(_) => "XGB",
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[usize], n_classes: usize, seed: u64) -> Result<Model> {
        Ok(match self {
            ModelSpec::RandomForest(p) => Model::Forest(fit_forest(x, y, n_classes, p, seed)?),
            ModelSpec::Boosted(p) => Model::Boosted(fit_boosted(x, y, n_classes, p, seed)?),
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" | "random_forest" | "forest" => Ok(ModelSpec::rf()),
            "xgb" | "boosted" | "gbt" => Ok(ModelSpec::xgb()),
            other => Err(Error::InvalidInput(format!("unknown model {other:?} (expected rf or xgb)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Forest(ForestModel),
    Boosted(BoostedModel),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    model: Model,
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Forest(m) => m.n_features,
            Model::Boosted(m) => m.n_features,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Model::Forest(m) => m.n_classes,
            Model::Boosted(m) => m.n_classes,
        }
    }

    pub fn predict_proba_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.len() });
        }
        Ok(match self {
            Model::Forest(m) => m.predict_proba_row(x),
            Model::Boosted(m) => m.predict_proba_row(x),
        })
    }

    /// Per-row class probabilities; each row sums to one.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.n_cols() });
        }
        x.rows().map(|r| self.predict_proba_row(r)).collect()
    }

    /// Arg-max class; ties go to the lower class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.iter().map(|p| argmax(p)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile { version: MODEL_FORMAT_VERSION, model: self.clone() })?)
    }

    pub fn from_json(s: &str) -> Result<Model> {
        let f: ModelFile = serde_json::from_str(s)?;
        if f.version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported model format version {}", f.version)));
        }
        Ok(f.model)
    }
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Mean drop in `metric` when one column is shuffled, per column.
pub fn permutation_importance(
    model: &Model,
    x: &Matrix,
    y: &[usize],
    metric: impl Fn(&[usize], &[usize]) -> f64,
    seed: u64,
    repeats: usize,
) -> Result<Vec<f64>> {
    let baseline = metric(y, &model.predict(x)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(x.n_cols());
    for j in 0..x.n_cols() {
        let mut drop = 0.0;
        for _ in 0..repeats.max(1) {
            let mut col = x.column(j);
            col.shuffle(&mut rng);
            let mut shuffled = x.clone();
            for (i, v) in col.into_iter().enumerate() {
                shuffled.set(i, j, v);
            }
            drop += baseline - metric(y, &model.predict(&shuffled)?);
        }
        out.push(drop / repeats.max(1) as f64);
    }
    Ok(out)
}
