//! Gradient-boosted regression trees with logistic loss.
//!
//! Each round fits a tree to the first and second derivatives of the log loss
//! at the current margins. A split of a node with gradient sums `G`, `H` into
//! children `(G_L, H_L)` and `(G_R, H_R)` gains
//!
//! ```text
//! 0.5 * (G_L² / (H_L + λ) + G_R² / (H_R + λ) - G² / (H + λ)) - γ
//! ```
//!
//! and is taken only when that gain is positive. Leaves predict `-G / (H + λ)`.
//! Candidate thresholds are midpoints between consecutive observed values of a
//! feature, with absent sparse entries counted as `0`.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::rng;
use crate::textproc::SparseVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Minimum loss reduction required to split (xgboost's gamma).
    pub min_split_loss: f64,
    pub subsample: f64,
    pub l2_lambda: f64,
    pub num_rounds: usize,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            learning_rate: 0.1,
            max_depth: 4,
            min_split_loss: 0.0,
            subsample: 1.0,
            l2_lambda: 1.0,
            num_rounds: 100,
            seed: 0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("subsample must lie in (0, 1]"));
        }
        if self.l2_lambda < 0.0 || self.min_split_loss < 0.0 {
            return Err(Error::invalid(
                "l2_lambda and min_split_loss must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn evaluate(&self, x: &SparseVector) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x.get(*feature) < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn visit_leaves(&self, f: &mut impl FnMut(f64)) {
        match self {
            Node::Leaf { value } => f(*value),
            Node::Split { left, right, .. } => {
                left.visit_leaves(f);
                right.visit_leaves(f);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub dim: usize,
    /// Prior log-odds.
    pub base_score: f64,
    pub trees: Vec<Node>,
}

impl GbtModel {
    pub fn margin(&self, x: &SparseVector) -> f64 {
        self.base_score
            + self.params.learning_rate * self.trees.iter().map(|t| t.evaluate(x)).sum::<f64>()
    }

    pub fn predict(&self, x: &SparseVector) -> f64 {
        sigmoid(self.margin(x))
    }

    /// The model after its first `rounds` trees.
    pub fn truncated(&self, rounds: usize) -> GbtModel {
        GbtModel {
            trees: self.trees[..rounds.min(self.trees.len())].to_vec(),
            ..self.clone()
        }
    }

    /// Mean log loss over a labelled set.
    pub fn log_loss(&self, x: &[SparseVector], y: &[bool]) -> f64 {
        let total: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, &yi)| {
                let m = self.margin(xi);
                if yi {
                    softplus(-m)
                } else {
                    softplus(m)
                }
            })
            .sum();
        total / x.len().max(1) as f64
    }

    pub fn leaves_finite(&self) -> bool {
        let mut ok = true;
        for t in &self.trees {
            t.visit_leaves(&mut |v| ok &= v.is_finite());
        }
        ok
    }
}

pub fn predict_gbt(model: &GbtModel, x: &SparseVector) -> f64 {
    model.predict(x)
}

const PRIOR_CLAMP: f64 = 1e-6;
const MIN_GAIN: f64 = 1e-12;
const MIN_HESSIAN: f64 = 1e-16;

struct Builder<'a> {
    x: &'a [SparseVector],
    grad: Vec<f64>,
    hess: Vec<f64>,
    params: &'a GbtParams,
    // Per-feature (value, g, h) buckets, reused across nodes.
    buckets: Vec<Vec<(f64, f64, f64)>>,
    touched: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

impl<'a> Builder<'a> {
    fn best_split(&mut self, rows: &[usize], g_tot: f64, h_tot: f64) -> Option<SplitChoice> {
        for &r in rows {
            for (j, v) in self.x[r].iter() {
                if self.buckets[j].is_empty() {
                    self.touched.push(j);
                }
                self.buckets[j].push((v, self.grad[r], self.hess[r]));
            }
        }
        self.touched.sort_unstable();
        let lambda = self.params.l2_lambda;
        let parent = score(g_tot, h_tot, lambda);
        let mut best: Option<SplitChoice> = None;
        let n = rows.len();
        for &j in &self.touched {
            let entries = &mut self.buckets[j];
            let (mut g_nz, mut h_nz) = (0.0, 0.0);
            for &(_, g, h) in entries.iter() {
                g_nz += g;
                h_nz += h;
            }
            let zeros = n - entries.len();
            if zeros > 0 {
                entries.push((0.0, g_tot - g_nz, h_tot - h_nz));
            }
            entries.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut gl, mut hl) = (0.0, 0.0);
            let mut i = 0;
            while i < entries.len() {
                let v = entries[i].0;
                while i < entries.len() && entries[i].0 == v {
                    gl += entries[i].1;
                    hl += entries[i].2;
                    i += 1;
                }
                if i == entries.len() {
                    break;
                }
                let gr = g_tot - gl;
                let hr = h_tot - hl;
                let gain = 0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - parent)
                    - self.params.min_split_loss;
                if gain > MIN_GAIN && best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitChoice {
                        feature: j,
                        threshold: 0.5 * (v + entries[i].0),
                        gain,
                    });
                }
            }
        }
        for &j in &self.touched {
            self.buckets[j].clear();
        }
        self.touched.clear();
        best
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> Node {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let leaf = Node::Leaf {
            value: -g / (h + self.params.l2_lambda),
        };
        if depth >= self.params.max_depth || rows.len() < 2 {
            return leaf;
        }
        let Some(split) = self.best_split(rows, g, h) else {
            return leaf;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x[r].get(split.feature) < split.threshold);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.build(&left, depth + 1)),
            right: Box::new(self.build(&right, depth + 1)),
        }
    }
}

/// Fit a binary classifier. Row subsampling (when `subsample < 1`) draws a
/// fresh seeded subset each round.
pub fn train_gbt(x: &[SparseVector], y: &[bool], params: &GbtParams) -> Result<GbtModel> {
    params.validate()?;
    if x.is_empty() {
        return Err(Error::invalid("cannot train on an empty set"));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let dim = x[0].dim();
    if let Some(bad) = x.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    let n = x.len();
    let prior =
        (y.iter().filter(|&&v| v).count() as f64 / n as f64).clamp(PRIOR_CLAMP, 1.0 - PRIOR_CLAMP);
    let base_score = (prior / (1.0 - prior)).ln();
    let mut margins = vec![base_score; n];
    let mut builder = Builder {
        x,
        grad: vec![0.0; n],
        hess: vec![0.0; n],
        params,
        buckets: vec![Vec::new(); dim],
        touched: Vec::new(),
    };
    let take = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut trees = Vec::with_capacity(params.num_rounds);
    for round in 0..params.num_rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            builder.grad[i] = p - if y[i] { 1.0 } else { 0.0 };
            builder.hess[i] = (p * (1.0 - p)).max(MIN_HESSIAN);
        }
        let rows: Vec<usize> = if take == n {
            (0..n).collect()
        } else {
            let mut r = rng::stream(params.seed, &[round as u64]);
            let mut idx = sample(&mut r, n, take).into_vec();
            idx.sort_unstable();
            idx
        };
        let tree = builder.build(&rows, 0);
        for (i, m) in margins.iter_mut().enumerate() {
            *m += params.learning_rate * tree.evaluate(&x[i]);
        }
        trees.push(tree);
    }
    Ok(GbtModel {
        params: params.clone(),
        dim,
        base_score,
        trees,
    })
}
