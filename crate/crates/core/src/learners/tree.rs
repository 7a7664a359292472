//! CART trees grown on presorted feature orders.
//!
//! Candidate thresholds are midpoints between consecutive distinct values.
//! Among equally good splits the lowest feature index wins, then the lowest
//! threshold.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Relative slack when comparing split scores.
const SCORE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features drawn per split; `None` scans all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 12, min_samples_leaf: 2, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Class distribution for classification trees, a single value for regression trees.
    Leaf { value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub params: TreeParams,
}

impl DecisionTree {
    pub fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Root split as `(feature, threshold)`, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                _ => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// What the tree is fitted to.
pub(crate) enum Target<'a> {
    /// Gini classification over class indices `0..n_classes`.
    Class { y: &'a [usize], n_classes: usize },
    /// Least-squares fit of residuals; leaves hold `sum(residual) / sum(hessian)`.
    Gradient { residual: &'a [f64], hessian: &'a [f64] },
}

/// Sample rows sorted by each feature, shared by every tree grown on one matrix.
pub(crate) struct Presorted {
    pub by_feature: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let by_feature = (0..x.n_cols())
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.n_rows() as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { by_feature }
    }

    /// Per-feature orders over a multiset of rows (`samples[pos]` is a row index),
    /// expressed as positions into `samples`.
    pub fn restrict(&self, samples: &[usize], n_rows: usize) -> Vec<Vec<u32>> {
        // positions of each row in `samples`, grouped by row
        let mut start = vec![0u32; n_rows + 1];
        for &r in samples {
            start[r + 1] += 1;
        }
        for i in 0..n_rows {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut positions = vec![0u32; samples.len()];
        for (pos, &r) in samples.iter().enumerate() {
            positions[fill[r] as usize] = pos as u32;
            fill[r] += 1;
        }
        self.by_feature
            .iter()
            .map(|order| {
                let mut out = Vec::with_capacity(samples.len());
                for &r in order {
                    let r = r as usize;
                    out.extend_from_slice(&positions[start[r] as usize..start[r + 1] as usize]);
                }
                out
            })
            .collect()
    }
}

pub fn fit_tree(x: &Matrix, y: &[usize], n_classes: usize, params: &TreeParams) -> Result<DecisionTree> {
    if x.is_empty() {
        return Err(Error::Empty("training matrix"));
    }
    if y.len() != x.n_rows() {
        return Err(Error::InvalidInput(format!("{} labels for {} rows", y.len(), x.n_rows())));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidInput(format!("label {bad} outside 0..{n_classes}")));
    }
    let samples: Vec<usize> = (0..x.n_rows()).collect();
    let presorted = Presorted::new(x);
    Ok(grow(x, &samples, &presorted, Target::Class { y, n_classes }, params, None))
}

pub(crate) fn grow(
    x: &Matrix,
    samples: &[usize],
    presorted: &Presorted,
    target: Target<'_>,
    params: &TreeParams,
    rng: Option<&mut ChaCha8Rng>,
) -> DecisionTree {
    let order = presorted.restrict(samples, x.n_rows());
    let mut g = Grower {
        x,
        samples,
        target,
        params: *params,
        order,
        buf: vec![0; samples.len()],
        go_left: vec![false; samples.len()],
        nodes: Vec::new(),
        rng,
    };
    g.build(0, samples.len(), 0);
    DecisionTree { nodes: g.nodes, n_features: x.n_cols(), params: *params }
}

struct Grower<'a, 'r> {
    x: &'a Matrix,
    samples: &'a [usize],
    target: Target<'a>,
    params: TreeParams,
    order: Vec<Vec<u32>>,
    buf: Vec<u32>,
    go_left: Vec<bool>,
    nodes: Vec<Node>,
    rng: Option<&'r mut ChaCha8Rng>,
}

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_, '_> {
    #[inline]
    fn value(&self, pos: u32, f: usize) -> f64 {
        self.x.get(self.samples[pos as usize], f)
    }

    fn build(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: Vec::new() });
        let n = hi - lo;
        let can_split = depth < self.params.max_depth && n >= 2 * self.params.min_samples_leaf.max(1);
        let split = if can_split && !self.is_pure(lo, hi) { self.best_split(lo, hi) } else { None };
        match split {
            None => {
                self.nodes[id] = Node::Leaf { value: self.leaf_value(lo, hi) };
            }
            Some(best) => {
                let mid = self.partition(lo, hi, best.feature, best.threshold);
                let left = self.build(lo, mid, depth + 1);
                let right = self.build(mid, hi, depth + 1);
                self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
            }
        }
        id
    }

    fn is_pure(&self, lo: usize, hi: usize) -> bool {
        let order = &self.order[0];
        match &self.target {
            Target::Class { y, .. } => {
                let first = y[self.samples[order[lo] as usize]];
                order[lo..hi].iter().all(|&p| y[self.samples[p as usize]] == first)
            }
            Target::Gradient { residual, .. } => {
                let first = residual[self.samples[order[lo] as usize]];
                order[lo..hi].iter().all(|&p| residual[self.samples[p as usize]] == first)
            }
        }
    }

    fn leaf_value(&self, lo: usize, hi: usize) -> Vec<f64> {
        let order = &self.order[0];
        match &self.target {
            Target::Class { y, n_classes } => {
                let mut counts = vec![0.0; *n_classes];
                for &p in &order[lo..hi] {
                    counts[y[self.samples[p as usize]]] += 1.0;
                }
                let n = (hi - lo) as f64;
                counts.iter_mut().for_each(|c| *c /= n);
                counts
            }
            Target::Gradient { residual, hessian } => {
                let (mut r, mut h) = (0.0, 0.0);
                for &p in &order[lo..hi] {
                    let s = self.samples[p as usize];
                    r += residual[s];
                    h += hessian[s];
                }
                vec![if h > 1e-12 { r / h } else { 0.0 }]
            }
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.n_cols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < d => {
                let mut f = sample(rng, d, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, lo: usize, hi: usize) -> Option<Best> {
        let features = self.candidate_features();
        let mut best: Option<Best> = None;
        for f in features {
            let cand = match self.target {
                Target::Class { .. } => self.scan_gini(lo, hi, f),
                Target::Gradient { .. } => self.scan_squared(lo, hi, f),
            };
            if let Some(c) = cand {
                let better = match &best {
                    None => true,
                    Some(b) => c.score < b.score - SCORE_EPS * b.score.abs().max(1.0),
                };
                if better {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn midpoint(a: f64, b: f64) -> f64 {
        let m = a + (b - a) / 2.0;
        if m >= b {
            a
        } else {
            m
        }
    }

    /// Minimises `n * weighted Gini = sum over children of (n_c - sum_k count_k^2 / n_c)`.
    fn scan_gini(&self, lo: usize, hi: usize, f: usize) -> Option<Best> {
        let Target::Class { y, n_classes } = &self.target else { unreachable!() };
        let order = &self.order[f];
        let msl = self.params.min_samples_leaf.max(1);
        let n = hi - lo;
        let mut right = vec![0u64; *n_classes];
        for &p in &order[lo..hi] {
            right[y[self.samples[p as usize]]] += 1;
        }
        let mut left = vec![0u64; *n_classes];
        let mut ssq_r: u64 = right.iter().map(|c| c * c).sum();
        let mut ssq_l: u64 = 0;
        let mut best: Option<Best> = None;
        for i in lo..hi - 1 {
            let p = order[i];
            let c = y[self.samples[p as usize]];
            ssq_l += 2 * left[c] + 1;
            left[c] += 1;
            ssq_r -= 2 * right[c] - 1;
            right[c] -= 1;
            let n_l = i - lo + 1;
            let n_r = n - n_l;
            if n_l < msl || n_r < msl {
                continue;
            }
            let v = self.value(p, f);
            let v_next = self.value(order[i + 1], f);
            if v_next <= v {
                continue;
            }
            let score = (n_l as f64 - ssq_l as f64 / n_l as f64) + (n_r as f64 - ssq_r as f64 / n_r as f64);
            let better = match &best {
                None => true,
                Some(b) => score < b.score - SCORE_EPS * b.score.abs().max(1.0),
            };
            if better {
                best = Some(Best { score, feature: f, threshold: Self::midpoint(v, v_next) });
            }
        }
        best
    }

    /// Minimises `-(S_l^2 / n_l + S_r^2 / n_r)`, i.e. the children's squared error.
    fn scan_squared(&self, lo: usize, hi: usize, f: usize) -> Option<Best> {
        let Target::Gradient { residual, .. } = &self.target else { unreachable!() };
        let order = &self.order[f];
        let msl = self.params.min_samples_leaf.max(1);
        let n = hi - lo;
        let total: f64 = order[lo..hi].iter().map(|&p| residual[self.samples[p as usize]]).sum();
        let mut s_l = 0.0;
        let mut best: Option<Best> = None;
        for i in lo..hi - 1 {
            let p = order[i];
            s_l += residual[self.samples[p as usize]];
            let n_l = i - lo + 1;
            let n_r = n - n_l;
            if n_l < msl || n_r < msl {
                continue;
            }
            let v = self.value(p, f);
            let v_next = self.value(order[i + 1], f);
            if v_next <= v {
                continue;
            }
            let s_r = total - s_l;
            let score = -(s_l * s_l / n_l as f64 + s_r * s_r / n_r as f64);
            let better = match &best {
                None => true,
                Some(b) => score < b.score - SCORE_EPS * b.score.abs().max(1.0),
            };
            if better {
                best = Some(Best { score, feature: f, threshold: Self::midpoint(v, v_next) });
            }
        }
        best
    }

    /// Stable-partitions every feature order in `[lo, hi)`; returns the split point.
    fn partition(&mut self, lo: usize, hi: usize, feature: usize, threshold: f64) -> usize {
        let mut n_left = 0;
        for i in lo..hi {
            let p = self.order[feature][i];
            let left = self.value(p, feature) <= threshold;
            self.go_left[p as usize] = left;
            n_left += usize::from(left);
        }
        for f in 0..self.order.len() {
            let order = &mut self.order[f];
            let (mut l, mut r) = (lo, lo + n_left);
            for i in lo..hi {
                let p = order[i];
                if self.go_left[p as usize] {
                    self.buf[l] = p;
                    l += 1;
                } else {
                    self.buf[r] = p;
                    r += 1;
                }
            }
            order[lo..hi].copy_from_slice(&self.buf[lo..hi]);
        }
        lo + n_left
    }
}
