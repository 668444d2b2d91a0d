//! One entry point for every method: the SLA variants and the two
//! whole-document baselines. Hyperparameters travel as flat name → value
//! configs so tuning can treat all methods alike.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{class_order, LabeledDocument, Report, SchemaSet};
use crate::error::{Error, Result};
use crate::learners::{train_gbt, train_l1_logreg, GbtModel, GbtParams, LinParams, LinearModel};
use crate::rng;
use crate::sla::{
    gold_labels, predict_document, train_sla, KeywordRules, Prediction, Segment, SelectedLines,
    SlaHyperParams, SlaModel, Variant,
};
use crate::textproc::{tokenize_lines, SparseVector, TokenLine, Vocabulary, DEFAULT_MIN_COUNT};

pub type Config = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Sla(Variant),
    DocLogreg,
    DocBoost,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Sla(Variant::Sla),
        Method::Sla(Variant::Rules),
        Method::Sla(Variant::Oracle),
        Method::Sla(Variant::NoWeight),
        Method::Sla(Variant::NoJoin),
        Method::Sla(Variant::NoWeightNoJoin),
        Method::DocLogreg,
        Method::DocBoost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sla(v) => v.as_str(),
            Method::DocLogreg => "doc-logreg",
            Method::DocBoost => "doc-boost",
        }
    }

    /// Trains gradient-boosted trees somewhere.
    pub fn uses_gbt(self) -> bool {
        match self {
            Method::Sla(v) => v.uses_scorer(),
            Method::DocLogreg => false,
            Method::DocBoost => true,
        }
    }

    pub fn uses_logreg(self) -> bool {
        self != Method::DocBoost
    }

    /// Hyperparameters used when nothing is tuned.
    pub fn default_config(self) -> Config {
        let mut c = Config::new();
        if self.uses_gbt() {
            let g = GbtParams::default();
            c.insert("learning_rate".into(), g.learning_rate);
            c.insert("max_depth".into(), g.max_depth as f64);
            c.insert("gamma".into(), g.min_split_loss);
            c.insert("subsample".into(), g.subsample);
            c.insert("lambda".into(), g.l2_lambda);
        }
        if self.uses_logreg() {
            c.insert("c".into(), LinParams::default().c);
        }
        match self {
            Method::Sla(v) => {
                if v.uses_scorer() {
                    c.insert("line_ngram_n".into(), 2.0);
                    c.insert("k".into(), 2.0);
                }
                c.insert("final_ngram_n".into(), 2.0);
            }
            Method::DocLogreg | Method::DocBoost => {
                c.insert("ngram_n".into(), 2.0);
            }
        }
        c
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                Error::invalid(format!(
                    "unknown method {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.as_str().to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

fn get(config: &Config, key: &str, default: f64) -> f64 {
    config.get(key).copied().unwrap_or(default)
}

fn get_usize(config: &Config, key: &str, default: usize) -> Result<usize> {
    let v = get(config, key, default as f64);
    if !(v >= 0.0 && v.fract() == 0.0) {
        return Err(Error::invalid(format!(
            "{key} must be a non-negative integer, got {v}"
        )));
    }
    Ok(v as usize)
}

/// GBT parameters from a config; unknown keys keep their defaults.
pub fn gbt_params(config: &Config, seed: u64) -> Result<GbtParams> {
    let d = GbtParams::default();
    let p = GbtParams {
        learning_rate: get(config, "learning_rate", d.learning_rate),
        max_depth: get_usize(config, "max_depth", d.max_depth)?,
        min_split_loss: get(config, "gamma", d.min_split_loss),
        subsample: get(config, "subsample", d.subsample),
        l2_lambda: get(config, "lambda", d.l2_lambda),
        num_rounds: get_usize(config, "num_rounds", d.num_rounds)?,
        seed,
    };
    p.validate()?;
    Ok(p)
}

pub fn lin_params(config: &Config) -> Result<LinParams> {
    let d = LinParams::default();
    let p = LinParams {
        c: get(config, "c", d.c),
        max_iter: get_usize(config, "max_iter", d.max_iter)?,
        tol: get(config, "tol", d.tol),
        ..d
    };
    p.validate()?;
    Ok(p)
}

pub fn sla_hyper(config: &Config, seed: u64) -> Result<SlaHyperParams> {
    let d = SlaHyperParams::default();
    let h = SlaHyperParams {
        line_ngram_n: get_usize(config, "line_ngram_n", d.line_ngram_n)?,
        final_ngram_n: get_usize(config, "final_ngram_n", d.final_ngram_n)?,
        k: get_usize(config, "k", d.k)?,
        gbt: gbt_params(config, seed)?,
        lin: lin_params(config)?,
    };
    h.validate()?;
    Ok(h)
}

/// Whole-document L1 logistic regression over within-line n-grams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocLogregModel {
    pub vocab: Vocabulary,
    pub classifier: LinearModel,
}

/// Whole-document one-vs-rest boosted trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocBoostModel {
    pub vocab: Vocabulary,
    pub classes: Vec<String>,
    pub per_class: Vec<GbtModel>,
}

impl DocBoostModel {
    pub fn predict(&self, x: &SparseVector) -> (String, BTreeMap<String, f64>) {
        let probs: Vec<f64> = if self.classes.len() == 1 {
            vec![1.0]
        } else {
            self.per_class.iter().map(|m| m.predict(x)).collect()
        };
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        let scores = self.classes.iter().cloned().zip(probs).collect();
        (self.classes[best].clone(), scores)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Sla(SlaModel),
    DocLogreg(DocLogregModel),
    DocBoost(DocBoostModel),
}

pub const BUNDLE_VERSION: u32 = 1;

/// A trained model with everything needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: u32,
    pub method: Method,
    pub attribute: String,
    pub config: Config,
    pub seed: u64,
    pub model: TrainedModel,
}

impl ModelBundle {
    pub fn from_json(text: &str) -> Result<Self> {
        let b: ModelBundle = serde_json::from_str(text)?;
        if b.version != BUNDLE_VERSION {
            return Err(Error::FormatVersion {
                expected: BUNDLE_VERSION,
                found: b.version,
            });
        }
        Ok(b)
    }
}

fn doc_vocab(lines: &[Vec<TokenLine>], n: usize) -> Result<Vocabulary> {
    Vocabulary::build(
        lines.iter().flatten().map(|l| l.tokens.as_slice()),
        n,
        DEFAULT_MIN_COUNT,
    )
}

/// Train `method` on `docs` for one attribute.
pub fn train(
    method: Method,
    docs: &[&LabeledDocument],
    attribute: &str,
    schemas: &SchemaSet,
    config: &Config,
    seed: u64,
    rules: Option<&KeywordRules>,
) -> Result<ModelBundle> {
    if docs.is_empty() {
        return Err(Error::invalid("training needs at least one document"));
    }
    let model = match method {
        Method::Sla(variant) => {
            let hyper = sla_hyper(config, rng::derive_seed(seed, &[1]))?;
            TrainedModel::Sla(train_sla(docs, attribute, schemas, &hyper, variant, rules)?)
        }
        Method::DocLogreg | Method::DocBoost => {
            let golds = gold_labels(docs, attribute, schemas)?;
            let classes = class_order(&golds);
            let labels: Vec<String> = golds.into_iter().map(|g| g.label).collect();
            let lines: Vec<Vec<TokenLine>> =
                docs.iter().map(|d| tokenize_lines(&d.report)).collect();
            let n = get_usize(config, "ngram_n", 2)?;
            let vocab = doc_vocab(&lines, n)?;
            let x: Vec<SparseVector> = lines.iter().map(|l| vocab.vectorize_document(l)).collect();
            if method == Method::DocLogreg {
                let classifier = train_l1_logreg(&x, &labels, &classes, &lin_params(config)?)?;
                TrainedModel::DocLogreg(DocLogregModel { vocab, classifier })
            } else {
                let mut per_class = Vec::new();
                if classes.len() > 1 {
                    for (ci, class) in classes.iter().enumerate() {
                        let y: Vec<bool> = labels.iter().map(|l| l == class).collect();
                        let params = gbt_params(config, rng::derive_seed(seed, &[2, ci as u64]))?;
                        per_class.push(train_gbt(&x, &y, &params)?);
                    }
                }
                TrainedModel::DocBoost(DocBoostModel {
                    vocab,
                    classes,
                    per_class,
                })
            }
        }
    };
    Ok(ModelBundle {
        version: BUNDLE_VERSION,
        method,
        attribute: attribute.to_string(),
        config: config.clone(),
        seed,
        model,
    })
}

/// Whole-document methods cite every line at weight 1.
fn whole_document(report: &Report, label: String, scores: BTreeMap<String, f64>) -> Prediction {
    let n = report.lines.len();
    Prediction {
        label,
        scores,
        rationale: SelectedLines {
            segments: vec![Segment {
                start_line: 0,
                end_line: n.saturating_sub(1),
                weight: 1.0,
            }],
            k: n,
        },
    }
}

/// Predict one document. Oracle bundles read the document's gold highlights.
pub fn predict(bundle: &ModelBundle, doc: &LabeledDocument) -> Result<Prediction> {
    match &bundle.model {
        TrainedModel::Sla(m) => predict_document(m, doc),
        TrainedModel::DocLogreg(m) => {
            let x = m.vocab.vectorize_document(&tokenize_lines(&doc.report));
            let (label, scores) = m.classifier.predict(&x);
            Ok(whole_document(&doc.report, label, scores))
        }
        TrainedModel::DocBoost(m) => {
            let x = m.vocab.vectorize_document(&tokenize_lines(&doc.report));
            let (label, scores) = m.predict(&x);
            Ok(whole_document(&doc.report, label, scores))
        }
    }
}
