//! One-vs-rest L1-regularized logistic regression.
//!
//! Each binary problem minimizes
//!
//! ```text
//! (1/C) * ||w||_1 + sum_i s_i * log(1 + exp(-y_i (w·x_i + b)))
//! ```
//!
//! with per-sample weights `s_i` (balanced class weights by default) and an
//! unpenalized intercept `b`. The solver is proximal gradient descent with a
//! backtracking line search; every accepted step satisfies the sufficient
//! decrease condition, so the objective never increases.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{balanced_class_weights, sigmoid, softplus};
use crate::error::{Error, Result};
use crate::textproc::SparseVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinParams {
    /// Inverse L1 penalty strength.
    pub c: f64,
    pub balanced: bool,
    pub max_iter: usize,
    /// Convergence threshold on the first-order optimality residual.
    pub tol: f64,
}

impl Default for LinParams {
    fn default() -> Self {
        LinParams {
            c: 1.0,
            balanced: true,
            max_iter: 1000,
            tol: 1e-4,
        }
    }
}

impl LinParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.tol > 0.0) {
            return Err(Error::invalid("C and tol must be positive"));
        }
        Ok(())
    }
}

/// Smooth part of the objective and its gradient `(f, ∂f/∂w, ∂f/∂b)`.
pub fn smooth_loss_grad(
    x: &[SparseVector],
    y: &[bool],
    sample_weight: &[f64],
    w: &[f64],
    b: f64,
) -> (f64, Vec<f64>, f64) {
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    let mut f = 0.0;
    for ((xi, &yi), &si) in x.iter().zip(y).zip(sample_weight) {
        let z = xi.dot(w) + b;
        f += si * if yi { softplus(-z) } else { softplus(z) };
        let r = si * (sigmoid(z) - if yi { 1.0 } else { 0.0 });
        gb += r;
        for (j, v) in xi.iter() {
            gw[j] += r * v;
        }
    }
    (f, gw, gb)
}

/// Largest violation of the L1 optimality conditions at `(w, b)`:
/// `|g_j + penalty*sign(w_j)|` for nonzero `w_j`, `max(|g_j| - penalty, 0)` for
/// zero `w_j`, and `|g_b|` for the intercept.
pub fn optimality_residual(gw: &[f64], gb: f64, w: &[f64], penalty: f64) -> f64 {
    let mut worst = gb.abs();
    for (&g, &wj) in gw.iter().zip(w) {
        let r = if wj == 0.0 {
            (g.abs() - penalty).max(0.0)
        } else {
            (g + penalty * wj.signum()).abs()
        };
        worst = worst.max(r);
    }
    worst
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each accepted step, starting from the initial point.
    pub objective_trace: Vec<f64>,
}

pub fn l1_objective(
    x: &[SparseVector],
    y: &[bool],
    sample_weight: &[f64],
    w: &[f64],
    b: f64,
    penalty: f64,
) -> f64 {
    let f: f64 = x
        .iter()
        .zip(y)
        .zip(sample_weight)
        .map(|((xi, &yi), &si)| {
            let z = xi.dot(w) + b;
            si * if yi { softplus(-z) } else { softplus(z) }
        })
        .sum();
    f + penalty * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// `loss(z_old + dz) - loss(z_old)` for one example, where loss is
/// `softplus(-z)` for positives and `softplus(z)` for negatives.
fn loss_change(z_old: f64, dz: f64, positive: bool) -> f64 {
    let (z, dz) = if positive { (-z_old, -dz) } else { (z_old, dz) };
    // softplus(z + dz) - softplus(z) = ln(1 + sigmoid(z) * (exp(dz) - 1))
    let e = dz.exp_m1();
    if e.is_finite() {
        (sigmoid(z) * e).ln_1p()
    } else {
        softplus(z + dz) - softplus(z)
    }
}

/// Proximal gradient on one binary problem with L1 weight `penalty`.
pub fn fit_binary_l1(
    x: &[SparseVector],
    y: &[bool],
    sample_weight: &[f64],
    dim: usize,
    penalty: f64,
    max_iter: usize,
    tol: f64,
) -> BinaryFit {
    let mut w = vec![0.0; dim];
    // Start the intercept at the weighted log-odds.
    let (mut pos, mut tot) = (0.0, 0.0);
    for (&yi, &si) in y.iter().zip(sample_weight) {
        tot += si;
        if yi {
            pos += si;
        }
    }
    let prior = (pos / tot).clamp(1e-6, 1.0 - 1e-6);
    let mut b = (prior / (1.0 - prior)).ln();

    let lipschitz: f64 = 0.25
        * x.iter()
            .zip(sample_weight)
            .map(|(xi, &si)| si * (1.0 + xi.values().iter().map(|v| v * v).sum::<f64>()))
            .sum::<f64>();
    let mut step = 1.0 / lipschitz.max(1e-12);

    let (f0, mut gw, mut gb) = smooth_loss_grad(x, y, sample_weight, &w, b);
    let mut margins: Vec<f64> = x.iter().map(|xi| xi.dot(&w) + b).collect();
    let mut objective = f0;
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;
    let mut w_new = vec![0.0; dim];
    let mut margins_new = vec![0.0; x.len()];
    let mut delta = vec![0.0; dim];

    while iterations < max_iter {
        if optimality_residual(&gw, gb, &w, penalty) <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..60 {
            for j in 0..dim {
                w_new[j] = soft_threshold(w[j] - step * gw[j], step * penalty);
            }
            let b_new = b - step * gb;
            let db = b_new - b;
            let mut lin = gb * db;
            let mut sq = db * db;
            let mut l1_delta = 0.0;
            for j in 0..dim {
                let d = w_new[j] - w[j];
                delta[j] = d;
                lin += gw[j] * d;
                sq += d * d;
                // Same-sign differences go through `d` to avoid cancellation.
                l1_delta += if w_new[j] * w[j] > 0.0 {
                    d * w[j].signum()
                } else {
                    w_new[j].abs() - w[j].abs()
                };
            }
            // The loss change is accumulated from per-sample margin increments,
            // which keeps it accurate long after the objective totals agree to
            // machine precision.
            let mut smooth_delta = 0.0;
            for (i, xi) in x.iter().enumerate() {
                let dz = xi.dot(&delta) + db;
                margins_new[i] = margins[i] + dz;
                smooth_delta += sample_weight[i] * loss_change(margins[i], dz, y[i]);
            }
            let total_delta = smooth_delta + penalty * l1_delta;
            if smooth_delta <= lin + sq / (2.0 * step) && total_delta <= 0.0 {
                std::mem::swap(&mut w, &mut w_new);
                std::mem::swap(&mut margins, &mut margins_new);
                b = b_new;
                accepted = true;
                objective += total_delta;
                trace.push(objective);
                (_, gw, gb) = smooth_loss_grad(x, y, sample_weight, &w, b);
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 1.5;
    }
    if !converged {
        converged = optimality_residual(&gw, gb, &w, penalty) <= tol;
    }
    BinaryFit {
        weights: w,
        intercept: b,
        iterations,
        converged,
        objective_trace: trace,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: Vec<String>,
    pub dim: usize,
    #[serde(with = "sparse_rows")]
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub params: LinParams,
}

mod sparse_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row {
        dim: usize,
        nonzeros: Vec<(usize, f64)>,
    }

    pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        rows.iter()
            .map(|r| Row {
                dim: r.len(),
                nonzeros: r
                    .iter()
                    .copied()
                    .enumerate()
                    .filter(|(_, v)| *v != 0.0)
                    .collect(),
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        use serde::de::Error;
        Vec::<Row>::deserialize(d)?
            .into_iter()
            .map(|r| {
                let mut dense = vec![0.0; r.dim];
                for (i, v) in r.nonzeros {
                    *dense
                        .get_mut(i)
                        .ok_or_else(|| D::Error::custom("weight index out of range"))? = v;
                }
                Ok(dense)
            })
            .collect()
    }
}

impl LinearModel {
    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| sigmoid(x.dot(w) + b))
            .collect()
    }

    /// Argmax class (first in class order on ties) and the per-class scores.
    pub fn predict(&self, x: &SparseVector) -> (String, BTreeMap<String, f64>) {
        let scores = self.scores(x);
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        let map = self.classes.iter().cloned().zip(scores).collect();
        (self.classes[best].clone(), map)
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().flatten().filter(|v| **v != 0.0).count()
    }
}

pub fn predict_logreg(model: &LinearModel, x: &SparseVector) -> (String, BTreeMap<String, f64>) {
    model.predict(x)
}

/// Fit one binary problem per class in `classes` (the tie-break order).
/// Every label must belong to `classes`. A single class yields a constant model.
pub fn train_l1_logreg(
    x: &[SparseVector],
    labels: &[String],
    classes: &[String],
    params: &LinParams,
) -> Result<LinearModel> {
    params.validate()?;
    if x.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: labels.len(),
        });
    }
    if x.is_empty() || classes.is_empty() {
        return Err(Error::invalid(
            "logistic regression needs at least one example and class",
        ));
    }
    let dim = x[0].dim();
    if let Some(bad) = x.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    if let Some(l) = labels.iter().find(|l| !classes.contains(l)) {
        return Err(Error::invalid(format!(
            "label {l:?} is not among the classes"
        )));
    }
    let sample_weight: Vec<f64> = if params.balanced {
        let cw = balanced_class_weights(labels);
        labels.iter().map(|l| cw[l]).collect()
    } else {
        vec![1.0; labels.len()]
    };
    let penalty = 1.0 / params.c;
    let mut weights = Vec::with_capacity(classes.len());
    let mut intercepts = Vec::with_capacity(classes.len());
    if classes.len() == 1 {
        weights.push(vec![0.0; dim]);
        intercepts.push(0.0);
    } else {
        for class in classes {
            let y: Vec<bool> = labels.iter().map(|l| l == class).collect();
            let fit = fit_binary_l1(
                x,
                &y,
                &sample_weight,
                dim,
                penalty,
                params.max_iter,
                params.tol,
            );
            weights.push(fit.weights);
            intercepts.push(fit.intercept);
        }
    }
    Ok(LinearModel {
        classes: classes.to_vec(),
        dim,
        weights,
        intercepts,
        params: params.clone(),
    })
}
