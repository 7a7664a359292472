//! SMOTE oversampling and Edited-Nearest-Neighbour cleaning for binary labels.
//!
//! Distances are Euclidean on features standardised with the mean/std of the
//! original (non-synthetic) rows. Synthetic rows are generated in the
//! original feature space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_K_SMOTE: usize = 5;
pub const DEFAULT_K_ENN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    /// Copy of an input row, identified by the caller's row id.
    Original(usize),
    /// `base + u * (neighbor - base)`, both ids referring to original rows.
    Synthetic { base: usize, neighbor: usize, u: f64 },
}

impl Provenance {
    /// Every original row id this row was derived from.
    pub fn sources(&self) -> Vec<usize> {
        match *self {
            Provenance::Original(id) => vec![id],
            Provenance::Synthetic { base, neighbor, .. } => vec![base, neighbor],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainMatrix {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Balance {
    None,
    Smote,
    Smoteenn,
}

impl Balance {
    pub fn as_str(self) -> &'static str {
        match self {
            Balance::None => "none",
            Balance::Smote => "smote",
            Balance::Smoteenn => "smoteenn",
        }
    }
}

impl std::fmt::Display for Balance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Balance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Balance::None),
            "smote" => Ok(Balance::Smote),
            "smoteenn" => Ok(Balance::Smoteenn),
            other => Err(Error::InvalidInput(format!("unknown balancing {other:?}"))),
        }
    }
}

impl TrainMatrix {
    /// Wraps rows whose ids are `ids` (one per row).
    pub fn new(x: Matrix, y: Vec<usize>, ids: &[usize]) -> Result<Self> {
        if y.len() != x.n_rows() || ids.len() != x.n_rows() {
            return Err(Error::InvalidInput("rows, labels and ids differ in length".into()));
        }
        if let Some(&bad) = y.iter().find(|&&c| c > 1) {
            return Err(Error::InvalidInput(format!("label {bad} is not binary")));
        }
        let provenance = ids.iter().map(|&i| Provenance::Original(i)).collect();
        Ok(TrainMatrix { x, y, provenance })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.y.iter().filter(|&&c| c == 1).count();
        [self.y.len() - ones, ones]
    }

    /// Distinct original row ids that contributed to any row.
    pub fn source_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.provenance.iter().flat_map(Provenance::sources).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn scaled(&self) -> Matrix {
        let originals: Vec<usize> = self
            .provenance
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Provenance::Original(_)))
            .map(|(i, _)| i)
            .collect();
        let (mean, std) = self.x.select_rows(&originals).column_moments();
        self.x.standardized(&mean, &std)
    }

    fn keep(&self, keep: &[bool]) -> TrainMatrix {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep[i]).collect();
        TrainMatrix {
            x: self.x.select_rows(&idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            provenance: idx.iter().map(|&i| self.provenance[i]).collect(),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest members of `pool` to row `i` (excluding `i`); ties by index.
fn nearest(scaled: &Matrix, i: usize, pool: &[usize], k: usize) -> Vec<usize> {
    let q = scaled.row(i);
    let mut d: Vec<(f64, usize)> =
        pool.iter().filter(|&&j| j != i).map(|&j| (sq_dist(q, scaled.row(j)), j)).collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut top = d[..k].to_vec();
    top.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    top.into_iter().map(|(_, j)| j).collect()
}

/// Oversamples the minority class up to the majority count.
pub fn smote(train: &TrainMatrix, k: usize, seed: u64) -> Result<TrainMatrix> {
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let minority_class = usize::from(counts[1] < counts[0]);
    let n_new = counts[1 - minority_class] - counts[minority_class];
    if n_new == 0 {
        return Ok(train.clone());
    }
    let minority: Vec<usize> = (0..train.len()).filter(|&i| train.y[i] == minority_class).collect();
    let mut k = k;
    if minority.len() <= k {
        log::warn!("SMOTE: minority class has {} rows; k reduced from {k} to {}", minority.len(), minority.len() - 1);
        k = minority.len() - 1;
    }
    let scaled = train.scaled();
    let neighbours: Vec<Vec<usize>> = minority.par_iter().map(|&i| nearest(&scaled, i, &minority, k)).collect();

    let original_id = |row: usize| match train.provenance[row] {
        Provenance::Original(id) => Ok(id),
        Provenance::Synthetic { .. } => Err(Error::InvalidInput("SMOTE input already contains synthetic rows".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = train.clone();
    for _ in 0..n_new {
        let which = rng.random_range(0..minority.len());
        let base = minority[which];
        let nn = &neighbours[which];
        let neighbour = if nn.is_empty() { base } else { nn[rng.random_range(0..nn.len())] };
        let u: f64 = rng.random();
        let row: Vec<f64> = train
            .x
            .row(base)
            .iter()
            .zip(train.x.row(neighbour))
            .map(|(a, b)| a + u * (b - a))
            .collect();
        out.x.push_row(&row)?;
        out.y.push(minority_class);
        out.provenance.push(Provenance::Synthetic { base: original_id(base)?, neighbor: original_id(neighbour)?, u });
    }
    Ok(out)
}

/// Drops rows whose label disagrees with the majority of their `k` nearest neighbours.
pub fn enn(train: &TrainMatrix, k: usize) -> Result<TrainMatrix> {
    if k == 0 {
        return Err(Error::InvalidInput("ENN needs k >= 1".into()));
    }
    let n = train.len();
    if n < 2 {
        return Ok(train.clone());
    }
    let mut k = k;
    if k > n - 1 {
        log::warn!("ENN: k={k} exceeds dataset size - 1; clamped to {}", n - 1);
        k = n - 1;
    }
    let scaled = train.scaled();
    let all: Vec<usize> = (0..n).collect();
    let mut keep: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nn = nearest(&scaled, i, &all, k);
            let ones = nn.iter().filter(|&&j| train.y[j] == 1).count();
            let zeros = nn.len() - ones;
            let majority = match ones.cmp(&zeros) {
                std::cmp::Ordering::Greater => Some(1),
                std::cmp::Ordering::Less => Some(0),
                std::cmp::Ordering::Equal => None,
            };
            majority.is_none_or(|m| m == train.y[i])
        })
        .collect();
    for class in 0..2 {
        let present = (0..n).any(|i| train.y[i] == class);
        let survives = (0..n).any(|i| train.y[i] == class && keep[i]);
        if present && !survives {
            log::warn!("ENN would remove every row of class {class}; leaving that class untouched");
            for i in 0..n {
                if train.y[i] == class {
                    keep[i] = true;
                }
            }
        }
    }
    Ok(train.keep(&keep))
}

pub fn smoteenn(train: &TrainMatrix, k_smote: usize, k_enn: usize, seed: u64) -> Result<TrainMatrix> {
    enn(&smote(train, k_smote, seed)?, k_enn)
}

/// Applies the chosen balancing; `None` returns the input unchanged.
pub fn balance(train: &TrainMatrix, how: Balance, seed: u64) -> Result<TrainMatrix> {
    match how {
        Balance::None => Ok(train.clone()),
        Balance::Smote => smote(train, DEFAULT_K_SMOTE, seed),
        Balance::Smoteenn => smoteenn(train, DEFAULT_K_SMOTE, DEFAULT_K_ENN, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn tm(rows: &[(f64, f64, usize)]) -> TrainMatrix {
        let x = Matrix::from_rows(&rows.iter().map(|r| vec![r.0, r.1]).collect::<Vec<_>>()).unwrap();
        let y = rows.iter().map(|r| r.2).collect();
        let ids: Vec<usize> = (0..rows.len()).collect();
        TrainMatrix::new(x, y, &ids).unwrap()
    }

    fn clusters(n0: usize, n1: usize, seed: u64) -> TrainMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut rows = Vec::new();
        for i in 0..n0 + n1 {
            let c = usize::from(i >= n0);
            let centre = if c == 0 { 0.0 } else { 6.0 };
            rows.push((centre + noise.sample(&mut rng), centre + noise.sample(&mut rng), c));
        }
        tm(&rows)
    }

    fn check_convex(out: &TrainMatrix, input: &TrainMatrix) {
        for (i, p) in out.provenance.iter().enumerate() {
            match *p {
                Provenance::Original(id) => assert_eq!(out.x.row(i), input.x.row(id)),
                Provenance::Synthetic { base, neighbor, u } => {
                    assert!((0.0..=1.0).contains(&u));
                    let expect: Vec<f64> = input
                        .x
                        .row(base)
                        .iter()
                        .zip(input.x.row(neighbor))
                        .map(|(a, b)| a + u * (b - a))
                        .collect();
                    assert_eq!(out.x.row(i), expect.as_slice());
                    assert_eq!(input.y[base], out.y[i]);
                    assert_eq!(input.y[neighbor], out.y[i]);
                }
            }
        }
    }

    #[test]
    fn balanced_input_unchanged() {
        let t = clusters(10, 10, 1);
        assert_eq!(smote(&t, 5, 0).unwrap(), t);
    }

    #[test]
    fn two_point_minority_stays_on_segment() {
        let mut rows: Vec<(f64, f64, usize)> = (0..6).map(|i| (10.0 + i as f64, -3.0, 0)).collect();
        rows.push((0.0, 0.0, 1));
        rows.push((1.0, 1.0, 1));
        let t = tm(&rows);
        let out = smote(&t, 1, 3).unwrap();
        assert_eq!(out.class_counts(), [6, 6]);
        for i in 8..out.len() {
            let r = out.x.row(i);
            assert!((r[0] - r[1]).abs() < 1e-12 && (0.0..=1.0).contains(&r[0]));
        }
        check_convex(&out, &t);
    }

    #[test]
    fn counts_after_smote() {
        let t = clusters(20, 5, 2);
        let out = smote(&t, 5, 1).unwrap();
        assert_eq!(out.class_counts(), [20, 20]);
        check_convex(&out, &t);
        // prefix is the untouched input
        assert_eq!(out.x.select_rows(&(0..25).collect::<Vec<_>>()), t.x);
    }

    #[test]
    fn single_class_is_an_error() {
        let t = tm(&[(0.0, 0.0, 1), (1.0, 1.0, 1)]);
        assert!(matches!(smote(&t, 5, 0), Err(Error::SingleClass)));
    }

    #[test]
    fn enn_leaves_separated_clusters() {
        let t = clusters(15, 15, 3);
        assert_eq!(enn(&t, 3).unwrap(), t);
    }

    #[test]
    fn enn_removes_planted_mislabel() {
        let mut t = clusters(15, 15, 4);
        // row 3 sits in cluster 0; flip it
        t.y[3] = 1;
        let out = enn(&t, 3).unwrap();
        assert_eq!(out.len(), 29);
        assert!(!out.provenance.contains(&Provenance::Original(3)));
    }

    #[test]
    fn enn_clamps_k_and_protects_classes() {
        let t = tm(&[(0.0, 0.0, 0), (0.1, 0.0, 0), (0.2, 0.0, 0), (0.05, 0.0, 1)]);
        let out = enn(&t, 10).unwrap();
        assert_eq!(out.class_counts()[1], 1, "lone minority row must survive");
    }

    #[test]
    fn smoteenn_ratio_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 1.3).unwrap();
        let mut rows = Vec::new();
        for i in 0..160 {
            let c = usize::from(i >= 120);
            let centre = if c == 0 { 0.0 } else { 2.0 };
            rows.push((centre + noise.sample(&mut rng), centre + noise.sample(&mut rng), c));
        }
        let t = tm(&rows);
        let a = smoteenn(&t, 5, 3, 11).unwrap();
        let b = smoteenn(&t, 5, 3, 11).unwrap();
        assert_eq!(a, b);
        let [c0, c1] = a.class_counts();
        let ratio = c1 as f64 / c0 as f64;
        assert!((0.8..=1.25).contains(&ratio), "ratio {ratio} ({c0}/{c1})");
        check_convex(&a, &t);
    }

    #[test]
    fn smoteenn_on_balanced_separable_input_is_identity() {
        let t = clusters(12, 12, 5);
        assert_eq!(smoteenn(&t, 5, 3, 1).unwrap(), t);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn synthetic_rows_are_convex(seed in any::<u64>(), n1 in 2usize..12) {
                let t = clusters(25, n1, seed);
                let out = smote(&t, 5, seed).unwrap();
                prop_assert_eq!(out.class_counts(), [25, 25]);
                check_convex(&out, &t);
            }
        }
    }
}
