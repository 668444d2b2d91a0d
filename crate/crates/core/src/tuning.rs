//! Random search with k-fold cross-validation over per-method spaces.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledDocument, SchemaSet};
use crate::error::{Error, Result};
use crate::eval::micro_f1;
use crate::pipeline::{predict, train, Config, Method};
use crate::rng;
use crate::sla::{gold_labels, KeywordRules};

pub const DEFAULT_TRIALS: usize = 40;
pub const DEFAULT_FOLDS: usize = 4;

const FOLD_TAG: u64 = 0xF01D;
const TRIAL_TAG: u64 = 0x7121;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dimension {
    Discrete { values: Vec<f64> },
    /// `count` exponents evenly spaced over [lo, hi], base 10.
    LogGrid { count: usize, lo: f64, hi: f64 },
}

impl Dimension {
    pub fn len(&self) -> usize {
        match self {
            Dimension::Discrete { values } => values.len(),
            Dimension::LogGrid { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> f64 {
        match self {
            Dimension::Discrete { values } => values[i],
            Dimension::LogGrid { count, lo, hi } => {
                if *count == 1 {
                    return 10f64.powf(*lo);
                }
                let e = lo + (hi - lo) * i as f64 / (*count - 1) as f64;
                10f64.powf(e)
            }
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}

fn discrete(values: &[f64]) -> Dimension {
    Dimension::Discrete {
        values: values.to_vec(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub dimensions: BTreeMap<String, Dimension>,
}

impl SearchSpace {
    /// The standard search space restricted to what `method` uses.
    pub fn default_for(method: Method) -> Self {
        let mut d = BTreeMap::new();
        if method.uses_gbt() {
            d.insert(
                "learning_rate".to_string(),
                Dimension::LogGrid {
                    count: 500,
                    lo: -2.0,
                    hi: -0.5,
                },
            );
            d.insert("max_depth".into(), discrete(&[3.0, 4.0, 5.0, 6.0, 7.0]));
            d.insert("gamma".into(), discrete(&[0.0, 0.01, 0.05, 0.1, 0.5, 1.0]));
            d.insert("subsample".into(), discrete(&[0.5, 0.75, 1.0]));
            d.insert("lambda".into(), discrete(&[0.1, 0.5, 1.0, 1.5, 2.0]));
        }
        if method.uses_logreg() {
            d.insert(
                "c".to_string(),
                Dimension::LogGrid {
                    count: 500,
                    lo: -6.0,
                    hi: 6.0,
                },
            );
        }
        let ngram = discrete(&[1.0, 2.0, 3.0, 4.0]);
        for key in method.default_config().keys() {
            match key.as_str() {
                "line_ngram_n" | "final_ngram_n" | "ngram_n" => {
                    d.insert(key.clone(), ngram.clone());
                }
                "k" => {
                    d.insert(key.clone(), discrete(&[1.0, 2.0, 3.0, 4.0, 5.0]));
                }
                _ => {}
            }
        }
        SearchSpace { dimensions: d }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, dim) in &self.dimensions {
            if dim.is_empty() {
                return Err(Error::invalid(format!("search dimension {name:?} is empty")));
            }
            if let Dimension::LogGrid { lo, hi, .. } = dim {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::invalid(format!("log grid {name:?} needs finite lo <= hi")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SearchSpace = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// One uniform draw per dimension, in name order.
pub fn sample_config<R: Rng>(space: &SearchSpace, rng: &mut R) -> Config {
    space
        .dimensions
        .iter()
        .map(|(name, dim)| (name.clone(), dim.value(rng.gen_range(0..dim.len()))))
        .collect()
}

/// Fold id per document. Stratified by label when every class has at least
/// `folds` members, otherwise a shuffled round-robin partition.
pub fn fold_assignment(labels: &[String], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if labels.len() < folds {
        return Err(Error::invalid(format!(
            "{} documents cannot fill {folds} folds",
            labels.len()
        )));
    }
    let mut rng = rng::stream(seed, &[FOLD_TAG]);
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_str()).or_default().push(i);
    }
    let order: Vec<usize> = if by_class.values().all(|m| m.len() >= folds) {
        by_class
            .into_values()
            .flat_map(|mut members| {
                members.shuffle(&mut rng);
                members
            })
            .collect()
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut out = vec![0; labels.len()];
    for (pos, doc) in order.into_iter().enumerate() {
        out[doc] = pos % folds;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub config: Config,
    pub fold_scores: Vec<f64>,
    pub mean_micro_f1: f64,
}

/// Everything a tuning run needs besides the documents.
#[derive(Clone, Debug)]
pub struct TuneSpec<'a> {
    pub method: Method,
    pub attribute: &'a str,
    pub schemas: &'a SchemaSet,
    pub rules: Option<&'a KeywordRules>,
    pub folds: usize,
    pub seed: u64,
}

/// Mean held-out micro-F1 of `config` over the folds.
pub fn cross_validate(
    docs: &[&LabeledDocument],
    spec: &TuneSpec<'_>,
    config: &Config,
    trial: usize,
) -> Result<TrialResult> {
    let golds: Vec<String> = gold_labels(docs, spec.attribute, spec.schemas)?
        .into_iter()
        .map(|g| g.label)
        .collect();
    let assignment = fold_assignment(&golds, spec.folds, spec.seed)?;
    let mut fold_scores = Vec::with_capacity(spec.folds);
    for f in 0..spec.folds {
        let train_docs: Vec<&LabeledDocument> = docs
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a != f)
            .map(|(d, _)| *d)
            .collect();
        let seed = rng::derive_seed(spec.seed, &[TRIAL_TAG, trial as u64, f as u64]);
        let bundle = train(spec.method, &train_docs, spec.attribute, spec.schemas, config, seed, spec.rules)?;
        let mut preds = Vec::new();
        let mut held = Vec::new();
        for (i, d) in docs.iter().enumerate() {
            if assignment[i] == f {
                preds.push(predict(&bundle, d)?.label);
                held.push(golds[i].clone());
            }
        }
        fold_scores.push(micro_f1(&preds, &held)?);
    }
    Ok(TrialResult {
        trial,
        config: config.clone(),
        mean_micro_f1: fold_scores.iter().sum::<f64>() / fold_scores.len() as f64,
        fold_scores,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_trial: usize,
    pub best_config: Config,
    pub best_score: f64,
    pub trials: Vec<TrialResult>,
}

/// Index of the highest mean; the earliest trial wins ties.
pub fn best_trial(trials: &[TrialResult]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, t) in trials.iter().enumerate() {
        if best.is_none_or(|b| t.mean_micro_f1 > trials[b].mean_micro_f1) {
            best = Some(i);
        }
    }
    best
}

/// Draw `trials` configs and keep the one with the best CV micro-F1.
/// Trials run on the ambient rayon pool; results do not depend on its size.
pub fn random_search(
    docs: &[&LabeledDocument],
    spec: &TuneSpec<'_>,
    space: &SearchSpace,
    trials: usize,
) -> Result<SearchResult> {
    space.validate()?;
    if trials == 0 {
        return Err(Error::invalid("random search needs at least one trial"));
    }
    let configs: Vec<Config> = (0..trials)
        .map(|t| sample_config(space, &mut rng::stream(spec.seed, &[TRIAL_TAG, t as u64])))
        .collect();
    let results: Vec<TrialResult> = configs
        .par_iter()
        .enumerate()
        .map(|(t, c)| cross_validate(docs, spec, c, t))
        .collect::<Result<_>>()?;
    let b = best_trial(&results).expect("at least one trial");
    Ok(SearchResult {
        best_trial: b,
        best_config: results[b].config.clone(),
        best_score: results[b].mean_micro_f1,
        trials: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn log_grid_endpoints() {
        let d = Dimension::LogGrid {
            count: 500,
            lo: -6.0,
            hi: 6.0,
        };
        let v = d.values();
        assert_eq!(v.len(), 500);
        assert!((v[0] - 1e-6).abs() < 1e-18);
        assert!((v[499] - 1e6).abs() < 1e-6);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn singleton_dimension_is_forced() {
        let mut dims = BTreeMap::new();
        dims.insert("k".to_string(), discrete(&[3.0]));
        let space = SearchSpace { dimensions: dims };
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(sample_config(&space, &mut r)["k"], 3.0);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let space = SearchSpace::default_for(Method::DocBoost);
        let draw = |seed| {
            let mut r = rng::stream(seed, &[]);
            (0..5).map(|_| sample_config(&space, &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));
        assert_ne!(draw(4), draw(5));
    }

    #[test]
    fn default_spaces_match_methods() {
        for m in Method::ALL {
            let space = SearchSpace::default_for(m);
            space.validate().unwrap();
            let keys: Vec<&String> = space.dimensions.keys().collect();
            let defaults = m.default_config();
            assert_eq!(keys, defaults.keys().collect::<Vec<_>>(), "{m}");
        }
    }

    #[test]
    fn folds_partition_documents() {
        let labels: Vec<String> = (0..8).map(|i| format!("c{}", i % 3)).collect();
        let a = fold_assignment(&labels, 4, 9).unwrap();
        for f in 0..4 {
            assert_eq!(a.iter().filter(|&&x| x == f).count(), 2);
        }
        assert_eq!(a, fold_assignment(&labels, 4, 9).unwrap());
        assert!(fold_assignment(&labels[..3], 4, 9).is_err());

        let strat: Vec<String> = (0..12).map(|i| if i < 8 { "a" } else { "b" }.to_string()).collect();
        let a = fold_assignment(&strat, 4, 2).unwrap();
        for f in 0..4 {
            let members: Vec<usize> = (0..12).filter(|&i| a[i] == f).collect();
            assert_eq!(members.iter().filter(|&&i| i < 8).count(), 2);
            assert_eq!(members.iter().filter(|&&i| i >= 8).count(), 1);
        }
    }

    fn trial(i: usize, score: f64) -> TrialResult {
        TrialResult {
            trial: i,
            config: Config::new(),
            fold_scores: vec![score],
            mean_micro_f1: score,
        }
    }

    #[test]
    fn best_trial_tie_goes_early() {
        assert_eq!(best_trial(&[trial(0, 0.5)]), Some(0));
        assert_eq!(best_trial(&[trial(0, 0.9), trial(1, 0.4)]), Some(0));
        let ts: Vec<TrialResult> = [0.1, 0.2, 0.8, 0.3, 0.5, 0.8].iter().enumerate().map(|(i, &s)| trial(i, s)).collect();
        assert_eq!(best_trial(&ts), Some(2));
        assert_eq!(best_trial(&[]), None);
    }
}
