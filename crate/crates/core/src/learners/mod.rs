//! From-scratch learners: logistic-loss gradient-boosted trees for binary
//! line relevance and one-vs-rest L1 logistic regression for the final label.

pub mod gbt;
pub mod logreg;

use std::collections::BTreeMap;

pub use gbt::{predict_gbt, train_gbt, GbtModel, GbtParams, Node};
pub use logreg::{predict_logreg, train_l1_logreg, LinParams, LinearModel};

/// `n_total / (n_classes * n_c)` for every observed class.
pub fn balanced_class_weights<S: AsRef<str>>(labels: &[S]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_ref().to_string()).or_default() += 1;
    }
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    counts
        .into_iter()
        .map(|(c, nc)| (c, n / (k * nc as f64)))
        .collect()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_weights() {
        let w = balanced_class_weights(&["a", "a", "a", "b"]);
        assert!((w["a"] - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(w["b"], 2.0);
        let w = balanced_class_weights(&["a", "b"]);
        assert_eq!((w["a"], w["b"]), (1.0, 1.0));
        let w = balanced_class_weights(&["a", "a"]);
        assert_eq!(w.len(), 1);
        assert_eq!(w["a"], 1.0);
    }

    #[test]
    fn stable_link_functions() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
    }
}
