//! Utility evaluation: stratified 75:25 split, stratified k-fold and
//! leave-one-subject-out, with resampling applied to training rows only.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Design, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::learners::ModelSpec;
use crate::resampling::{balance, Balance, TrainMatrix};

pub const TEST_FRACTION: f64 = 0.25;
pub const DEFAULT_FOLDS: usize = 10;
/// LOSO test subjects need strictly more labelled days than this.
pub const DEFAULT_MIN_DAYS: usize = 10;
const MAX_RESPLITS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Split,
    Kfold,
    Loso,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Split, Regime::Kfold, Regime::Loso];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Split => "split",
            Regime::Kfold => "kfold",
            Regime::Loso => "loso",
        }
    }

    /// Balancing applied to training rows under this regime.
    pub fn balancing(self) -> Balance {
        match self {
            Regime::Split | Regime::Kfold => Balance::Smoteenn,
            Regime::Loso => Balance::Smote,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "split" | "random" => Ok(Regime::Split),
            "kfold" | "cv" => Ok(Regime::Kfold),
            "loso" => Ok(Regime::Loso),
            other => Err(Error::InvalidInput(format!("unknown regime {other:?} (expected split, kfold or loso)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    /// F1 of the stressed class.
    pub f1: f64,
    pub macro_f1: f64,
}

fn f1_for(y_true: &[usize], y_pred: &[usize], class: usize) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == class, p == class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    // nothing to find and nothing claimed: perfect agreement
    if denom == 0 {
        1.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Accuracy, positive-class F1 and macro F1 as fractions.
pub fn metrics(y_true: &[usize], y_pred: &[usize]) -> Result<Scores> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch { expected: y_true.len(), got: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("label vector"));
    }
    let correct = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    let f1 = f1_for(y_true, y_pred, 1);
    Ok(Scores {
        accuracy: correct as f64 / y_true.len() as f64,
        f1,
        macro_f1: (f1 + f1_for(y_true, y_pred, 0)) / 2.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// Fold number, or the held-out subject under LOSO.
    pub fold: String,
    pub n_train: usize,
    /// Training rows after resampling.
    pub n_fit: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub macro_f1: f64,
}

/// Row ids seen by one fold. Kept out of serialized reports.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FoldTrace {
    /// Original dataset rows that contributed to any row given to the learner.
    pub fit_sources: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub train_users: BTreeSet<String>,
    pub test_users: BTreeSet<String>,
}

impl FoldTrace {
    pub fn leaked_rows(&self) -> Vec<usize> {
        let test: BTreeSet<usize> = self.test_rows.iter().copied().collect();
        self.fit_sources.iter().copied().filter(|r| test.contains(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub regime: Regime,
    pub feature_set: FeatureSet,
    pub model: String,
    /// Percent.
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub macro_f1_mean: f64,
    pub balance: Balance,
    pub folds: Vec<FoldResult>,
    pub seed: u64,
    #[serde(skip)]
    pub trace: Vec<FoldTrace>,
}

impl EvalReport {
    pub const CSV_HEADER: [&'static str; 10] = [
        "regime",
        "feature_set",
        "model",
        "balance",
        "accuracy_mean",
        "accuracy_std",
        "f1_mean",
        "f1_std",
        "macro_f1_mean",
        "seed",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.regime.to_string(),
            self.feature_set.to_string(),
            self.model.clone(),
            self.balance.to_string(),
            format!("{:.2}", self.accuracy_mean),
            format!("{:.2}", self.accuracy_std),
            format!("{:.2}", self.f1_mean),
            format!("{:.2}", self.f1_std),
            format!("{:.2}", self.macro_f1_mean),
            self.seed.to_string(),
        ]
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Resamples the training rows, fits, and scores the test rows.
fn run_fold(
    d: &Design,
    train: &[usize],
    test: &[usize],
    spec: &ModelSpec,
    how: Balance,
    seed: u64,
    name: String,
) -> Result<(FoldResult, FoldTrace)> {
    let train_ids: Vec<usize> = train.iter().map(|&i| d.row_ids[i]).collect();
    let tm = TrainMatrix::new(d.x.select_rows(train), train.iter().map(|&i| d.y[i]).collect(), &train_ids)?;
    if tm.class_counts().contains(&0) {
        return Err(Error::SingleClass);
    }
    let fit = balance(&tm, how, seed)?;
    let model = spec.fit(&fit.x, &fit.y, 2, seed)?;
    let x_test = d.x.select_rows(test);
    let y_test: Vec<usize> = test.iter().map(|&i| d.y[i]).collect();
    let s = metrics(&y_test, &model.predict(&x_test)?)?;
    let users = |rows: &[usize]| rows.iter().map(|&i| d.users[d.user_idx[i]].clone()).collect();
    Ok((
        FoldResult {
            fold: name,
            n_train: train.len(),
            n_fit: fit.len(),
            n_test: test.len(),
            accuracy: s.accuracy,
            f1: s.f1,
            macro_f1: s.macro_f1,
        },
        FoldTrace {
            fit_sources: fit.source_ids(),
            test_rows: test.iter().map(|&i| d.row_ids[i]).collect(),
            train_users: users(train),
            test_users: users(test),
        },
    ))
}

fn report(
    regime: Regime,
    set: FeatureSet,
    spec: &ModelSpec,
    balance: Balance,
    seed: u64,
    results: Vec<(FoldResult, FoldTrace)>,
) -> EvalReport {
    let (folds, trace): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let pct = |f: fn(&FoldResult) -> f64| folds.iter().map(|r| 100.0 * f(r)).collect::<Vec<_>>();
    let (accuracy_mean, accuracy_std) = mean_std(&pct(|r| r.accuracy));
    let (f1_mean, f1_std) = mean_std(&pct(|r| r.f1));
    let (macro_f1_mean, _) = mean_std(&pct(|r| r.macro_f1));
    EvalReport {
        regime,
        feature_set: set,
        model: spec.short_name().to_string(),
        accuracy_mean,
        accuracy_std,
        f1_mean,
        f1_std,
        macro_f1_mean,
        balance,
        folds,
        seed,
        trace,
    }
}

fn by_class(y: &[usize]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, &c) in y.iter().enumerate() {
        out[c].push(i);
    }
    out
}

/// Per-class shuffled test draw of `round(fraction * n_class)` rows.
pub fn stratified_split(y: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut idx in by_class(y) {
        idx.shuffle(&mut rng);
        let k = (fraction * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Fold index per row; class members are dealt round-robin after a shuffle.
pub fn stratified_folds(y: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > y.len() {
        return Err(Error::InvalidInput(format!("k={k} folds for {} rows", y.len())));
    }
    let classes = by_class(y);
    if classes.iter().any(|c| c.len() < k) {
        return Err(Error::InvalidInput(format!(
            "cannot stratify {k} folds: class sizes {} and {}",
            classes[0].len(),
            classes[1].len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; y.len()];
    let mut pos = 0;
    for mut idx in classes {
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = pos % k;
            pos += 1;
        }
    }
    Ok(fold)
}

fn check_two_classes(d: &Design) -> Result<()> {
    if by_class(&d.y).iter().any(Vec::is_empty) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Knobs shared by the three regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub folds: usize,
    pub min_days: usize,
    /// Overrides the regime's own balancing when set.
    pub balance: Option<Balance>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { folds: DEFAULT_FOLDS, min_days: DEFAULT_MIN_DAYS, balance: None }
    }
}

impl EvalOptions {
    fn balance_for(&self, regime: Regime) -> Balance {
        self.balance.unwrap_or(regime.balancing())
    }
}

pub fn random_split_eval(ds: &LabeledDataset, set: FeatureSet, spec: &ModelSpec, seed: u64) -> Result<EvalReport> {
    split_with(ds, set, spec, Regime::Split.balancing(), seed)
}

fn split_with(ds: &LabeledDataset, set: FeatureSet, spec: &ModelSpec, how: Balance, seed: u64) -> Result<EvalReport> {
    let d = ds.design(set)?;
    check_two_classes(&d)?;
    for attempt in 0..MAX_RESPLITS {
        let s = seed.wrapping_add(attempt);
        let (train, test) = stratified_split(&d.y, TEST_FRACTION, s);
        let counts = by_class(&train.iter().map(|&i| d.y[i]).collect::<Vec<_>>()).map(|c| c.len());
        if counts.contains(&0) {
            log::warn!("split with seed {s} left a class out of training; resplitting");
            continue;
        }
        let r = run_fold(&d, &train, &test, spec, how, s, "0".into())?;
        return Ok(report(Regime::Split, set, spec, how, seed, vec![r]));
    }
    Err(Error::SingleClass)
}

pub fn kfold_eval(ds: &LabeledDataset, set: FeatureSet, spec: &ModelSpec, k: usize, seed: u64) -> Result<EvalReport> {
    kfold_with(ds, set, spec, k, Regime::Kfold.balancing(), seed)
}

fn kfold_with(ds: &LabeledDataset, set: FeatureSet, spec: &ModelSpec, k: usize, how: Balance, seed: u64) -> Result<EvalReport> {
    let d = ds.design(set)?;
    check_two_classes(&d)?;
    let fold = stratified_folds(&d.y, k, seed)?;
    let results = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..d.y.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..d.y.len()).filter(|&i| fold[i] == f).collect();
            run_fold(&d, &train, &test, spec, how, fold_seed(seed, f), f.to_string())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(Regime::Kfold, set, spec, how, seed, results))
}

/// Subjects eligible as LOSO test folds: strictly more than `min_days` labelled days.
pub fn loso_subjects(ds: &LabeledDataset, min_days: usize) -> Vec<String> {
    ds.day_counts().into_iter().filter(|(_, n)| *n > min_days).map(|(u, _)| u).collect()
}

pub fn loso_eval(ds: &LabeledDataset, set: FeatureSet, spec: &ModelSpec, min_days: usize, seed: u64) -> Result<EvalReport> {
    loso_with(ds, set, spec, min_days, Regime::Loso.balancing(), seed)
}

fn loso_with(ds: &LabeledDataset, set: FeatureSet, spec: &ModelSpec, min_days: usize, how: Balance, seed: u64) -> Result<EvalReport> {
    let d = ds.design(set)?;
    check_two_classes(&d)?;
    let subjects = loso_subjects(ds, min_days);
    if subjects.is_empty() {
        return Err(Error::InvalidInput(format!("no subject has more than {min_days} labelled days")));
    }
    let results = subjects
        .par_iter()
        .enumerate()
        .map(|(f, user)| {
            let u = d.users.binary_search(user).expect("subject in roster");
            let train: Vec<usize> = (0..d.y.len()).filter(|&i| d.user_idx[i] != u).collect();
            let test: Vec<usize> = (0..d.y.len()).filter(|&i| d.user_idx[i] == u).collect();
            run_fold(&d, &train, &test, spec, how, fold_seed(seed, f), user.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(Regime::Loso, set, spec, how, seed, results))
}

pub fn evaluate(ds: &LabeledDataset, regime: Regime, set: FeatureSet, spec: &ModelSpec, seed: u64) -> Result<EvalReport> {
    evaluate_with(ds, regime, set, spec, &EvalOptions::default(), seed)
}

pub fn evaluate_with(
    ds: &LabeledDataset,
    regime: Regime,
    set: FeatureSet,
    spec: &ModelSpec,
    opts: &EvalOptions,
    seed: u64,
) -> Result<EvalReport> {
    let how = opts.balance_for(regime);
    match regime {
        Regime::Split => split_with(ds, set, spec, how, seed),
        Regime::Kfold => kfold_with(ds, set, spec, opts.folds, how, seed),
        Regime::Loso => loso_with(ds, set, spec, opts.min_days, how, seed),
    }
}
