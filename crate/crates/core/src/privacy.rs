//! Re-identification attacks and mutual-information leakage scores.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::{quantile_sorted, FeatureSet};
use crate::learners::{fit_boosted, BoostParams};

pub const DEFAULT_MI_BINS: usize = 10;

/// How much of each user's history the attacker already holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackScenario {
    Rich,
    Moderate,
    Limited,
}

impl AttackScenario {
    pub const ALL: [AttackScenario; 3] = [AttackScenario::Rich, AttackScenario::Moderate, AttackScenario::Limited];

    pub fn train_fraction(self) -> f64 {
        match self {
            AttackScenario::Rich => 0.8,
            AttackScenario::Moderate => 0.5,
            AttackScenario::Limited => 0.2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttackScenario::Rich => "rich",
            AttackScenario::Moderate => "moderate",
            AttackScenario::Limited => "limited",
        }
    }
}

impl fmt::Display for AttackScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackScenario::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown scenario {s:?} (expected rich, moderate or limited)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub feature_set: FeatureSet,
    pub scenario: AttackScenario,
    /// Percent.
    pub top1: f64,
    pub top5: f64,
    /// Fraction of test rows whose identity ranks within the top k, for k = 1..=n_users.
    pub curve: Vec<f64>,
    pub n_users: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub excluded_users: Vec<String>,
    pub attacker: BoostParams,
    pub seed: u64,
}

impl AttackReport {
    /// Accuracy at `k` (clamped to the curve), as a fraction.
    pub fn at(&self, k: usize) -> f64 {
        self.curve[k.clamp(1, self.curve.len()) - 1]
    }
}

/// Rank (0-based) of `truth` when classes are ordered by descending
/// probability, ties broken by ascending class id.
fn rank_of(p: &[f64], truth: usize) -> usize {
    let pt = p[truth];
    p.iter().enumerate().filter(|&(j, &v)| v > pt || (v == pt && j < truth)).count()
}

/// Top-k accuracy for every k in `1..=n_classes`.
pub fn topk_curve(probs: &[Vec<f64>], truth: &[usize]) -> Result<Vec<f64>> {
    if probs.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: probs.len(), got: truth.len() });
    }
    if probs.is_empty() {
        return Err(Error::Empty("probability matrix"));
    }
    let n_classes = probs[0].len();
    let mut hits = vec![0usize; n_classes];
    for (p, &t) in probs.iter().zip(truth) {
        if p.len() != n_classes || t >= n_classes {
            return Err(Error::InvalidInput("ragged probability rows or id out of range".into()));
        }
        hits[rank_of(p, t)] += 1;
    }
    let n = probs.len() as f64;
    let mut acc = 0;
    Ok(hits
        .into_iter()
        .map(|h| {
            acc += h;
            acc as f64 / n
        })
        .collect())
}

/// Splits each user's rows at `fraction`; users with fewer than two rows are dropped.
fn per_user_split(user_of: &[usize], n_users: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    for (i, &u) in user_of.iter().enumerate() {
        rows[u].push(i);
    }
    let (mut train, mut test, mut excluded) = (Vec::new(), Vec::new(), Vec::new());
    for (u, mut r) in rows.into_iter().enumerate() {
        if r.len() < 2 {
            excluded.push(u);
            continue;
        }
        r.shuffle(&mut rng);
        let k = ((fraction * r.len() as f64).round() as usize).clamp(1, r.len() - 1);
        train.extend_from_slice(&r[..k]);
        test.extend_from_slice(&r[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test, excluded)
}

/// Trains a boosted multiclass attacker to recover the user id of each row.
pub fn reid_attack(
    ds: &LabeledDataset,
    set: FeatureSet,
    scenario: AttackScenario,
    attacker: &BoostParams,
    seed: u64,
) -> Result<AttackReport> {
    reid_attack_columns(ds, set, &[], scenario, attacker, seed)
}

/// As [`reid_attack`], with the named columns removed from the feature set.
pub fn reid_attack_columns(
    ds: &LabeledDataset,
    set: FeatureSet,
    drop: &[&str],
    scenario: AttackScenario,
    attacker: &BoostParams,
    seed: u64,
) -> Result<AttackReport> {
    let d = ds.design(set)?;
    let keep: Vec<usize> = (0..d.feature_names.len()).filter(|&j| !drop.contains(&d.feature_names[j])).collect();
    let x = d.x.select_cols(&keep);
    let (train, test, excluded) = per_user_split(&d.user_idx, d.users.len(), scenario.train_fraction(), seed);
    for &u in &excluded {
        log::warn!("user {} has fewer than two rows; excluded from the attack", d.users[u]);
    }
    // re-index the remaining users densely
    let mut class_of = vec![usize::MAX; d.users.len()];
    let mut kept_users = Vec::new();
    for u in 0..d.users.len() {
        if !excluded.contains(&u) {
            class_of[u] = kept_users.len();
            kept_users.push(u);
        }
    }
    if kept_users.len() < 2 {
        return Err(Error::InvalidInput("attack needs at least two users with two rows each".into()));
    }
    let y_train: Vec<usize> = train.iter().map(|&i| class_of[d.user_idx[i]]).collect();
    let y_test: Vec<usize> = test.iter().map(|&i| class_of[d.user_idx[i]]).collect();
    let model = fit_boosted(&x.select_rows(&train), &y_train, kept_users.len(), attacker, seed)?;
    let probs: Vec<Vec<f64>> = test.iter().map(|&i| model.predict_proba_row(x.row(i))).collect();
    let curve = topk_curve(&probs, &y_test)?;
    let at = |k: usize| 100.0 * curve[k.min(curve.len()) - 1];
    Ok(AttackReport {
        feature_set: set,
        scenario,
        top1: at(1),
        top5: at(5),
        n_users: kept_users.len(),
        n_train: train.len(),
        n_test: test.len(),
        excluded_users: excluded.iter().map(|&u| d.users[u].clone()).collect(),
        attacker: *attacker,
        seed,
        curve,
    })
}

/// Bin index per value: the number of quantile edges (at `j / n_bins`,
/// linear interpolation) strictly below the value.
pub fn quantile_bins(values: &[f64], n_bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..n_bins).map(|j| quantile_sorted(&sorted, j as f64 / n_bins as f64)).collect();
    values.iter().map(|v| edges.iter().filter(|&&e| e < *v).count()).collect()
}

/// Plug-in mutual information of two discrete sequences, in nats.
pub fn discrete_mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut pa: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
        *pa.entry(x).or_insert(0) += 1;
        *pb.entry(y).or_insert(0) += 1;
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let c = c as f64;
            c / n * (n * c / (pa[&x] as f64 * pb[&y] as f64)).ln()
        })
        .sum();
    mi.max(0.0)
}

/// MI between a quantile-binned feature and user identity, in nats.
pub fn mutual_information(values: &[f64], ids: &[usize], n_bins: usize) -> Result<f64> {
    if values.len() != ids.len() {
        return Err(Error::DimensionMismatch { expected: values.len(), got: ids.len() });
    }
    if n_bins < 2 {
        return Err(Error::InvalidInput("need at least two bins".into()));
    }
    if values.is_empty() {
        return Err(Error::Empty("feature values"));
    }
    Ok(discrete_mutual_information(&quantile_bins(values, n_bins), ids))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLeakage {
    pub feature: String,
    pub mi: f64,
}

/// Every feature of `set` scored against identity, highest MI first.
pub fn mi_ranking(ds: &LabeledDataset, set: FeatureSet, n_bins: usize) -> Result<Vec<FeatureLeakage>> {
    let d = ds.design(set)?;
    let mut out = (0..d.x.n_cols())
        .map(|j| {
            Ok(FeatureLeakage {
                feature: d.feature_names[j].to_string(),
                mi: mutual_information(&d.x.column(j), &d.user_idx, n_bins)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| b.mi.total_cmp(&a.mi));
    Ok(out)
}
