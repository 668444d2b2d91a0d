//! Metrics, bootstrap intervals, annotator agreement and the error taxonomy.

pub mod curve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

fn check_lengths<A, B>(a: &[A], b: &[B]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("metrics need at least one prediction"));
    }
    Ok(())
}

/// Row = gold class, column = predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new<S: AsRef<str>>(preds: &[S], golds: &[S], classes: &[String]) -> Result<Self> {
        check_lengths(preds, golds)?;
        let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut counts = vec![vec![0; classes.len()]; classes.len()];
        for (p, g) in preds.iter().zip(golds) {
            let lookup = |s: &str| {
                index
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("label {s:?} is outside the class set")))
            };
            counts[lookup(g.as_ref())?][lookup(p.as_ref())?] += 1;
        }
        Ok(ConfusionMatrix {
            classes: classes.to_vec(),
            counts,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }
}

/// Sorted union of gold labels, predictions and any extra classes.
pub fn class_universe<S: AsRef<str>>(preds: &[S], golds: &[S], extra: Option<&[String]>) -> Vec<String> {
    let mut set: BTreeSet<String> = preds.iter().chain(golds).map(|s| s.as_ref().to_string()).collect();
    if let Some(extra) = extra {
        set.extend(extra.iter().cloned());
    }
    set.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn per_class_metrics(cm: &ConfusionMatrix) -> BTreeMap<String, ClassMetrics> {
    let k = cm.classes.len();
    (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let gold: usize = cm.counts[c].iter().sum();
            let pred: usize = (0..k).map(|r| cm.counts[r][c]).sum();
            let precision = ratio(tp, pred);
            let recall = ratio(tp, gold);
            let f1 = ratio(2 * tp, gold + pred);
            (
                cm.classes[c].clone(),
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support: gold,
                },
            )
        })
        .collect()
}

/// Micro-averaged F1; equals accuracy for single-label inputs.
pub fn micro_f1<S: AsRef<str>>(preds: &[S], golds: &[S]) -> Result<f64> {
    check_lengths(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p.as_ref() == g.as_ref()).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Unweighted mean of per-class F1 over gold ∪ predictions ∪ `class_set`.
pub fn macro_f1<S: AsRef<str>>(preds: &[S], golds: &[S], class_set: Option<&[String]>) -> Result<f64> {
    check_lengths(preds, golds)?;
    let classes = class_universe(preds, golds, class_set);
    let cm = ConfusionMatrix::new(preds, golds, &classes)?;
    let per = per_class_metrics(&cm);
    Ok(per.values().map(|m| m.f1).sum::<f64>() / per.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MicroF1,
    MacroF1,
}

impl Metric {
    pub fn compute<S: AsRef<str>>(self, preds: &[S], golds: &[S]) -> Result<f64> {
        match self {
            Metric::MicroF1 => micro_f1(preds, golds),
            Metric::MacroF1 => macro_f1(preds, golds, None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            iterations: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("bootstrap needs at least one iteration"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid("confidence level must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile interval of `stat` over resamples of `n` units with replacement.
/// `stat` receives the resampled unit indices.
pub fn bootstrap_interval<F>(n: usize, cfg: &BootstrapConfig, mut stat: F) -> Result<(f64, f64)>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    cfg.validate()?;
    if n == 0 {
        return Err(Error::invalid("bootstrap needs at least one outcome"));
    }
    let mut rng = rng::stream(cfg.seed, &[0xB007]);
    let mut idx = vec![0usize; n];
    let mut values = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        for slot in idx.iter_mut() {
            *slot = rng.gen_range(0..n);
        }
        values.push(stat(&idx)?);
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.level) / 2.0;
    Ok((quantile(&values, tail), quantile(&values, 1.0 - tail)))
}

/// Bootstrap interval of a metric over documents.
pub fn bootstrap_ci<S: AsRef<str>>(
    preds: &[S],
    golds: &[S],
    metric: Metric,
    cfg: &BootstrapConfig,
) -> Result<(f64, f64)> {
    check_lengths(preds, golds)?;
    let mut p = Vec::with_capacity(preds.len());
    let mut g = Vec::with_capacity(preds.len());
    bootstrap_interval(preds.len(), cfg, |idx| {
        p.clear();
        g.clear();
        p.extend(idx.iter().map(|&i| preds[i].as_ref()));
        g.extend(idx.iter().map(|&i| golds[i].as_ref()));
        metric.compute(&p, &g)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<(f64, f64)> for Interval {
    fn from((lo, hi): (f64, f64)) -> Self {
        Interval { lo, hi }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub attribute: String,
    pub documents: usize,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub confusion: ConfusionMatrix,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub micro_f1_ci: Option<Interval>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub macro_f1_ci: Option<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub attributes: Vec<AttributeReport>,
    pub mean_micro_f1: f64,
    pub mean_macro_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_micro_f1_ci: Option<Interval>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_macro_f1_ci: Option<Interval>,
}

/// Predictions and gold labels for one attribute, aligned by document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcomes {
    pub attribute: String,
    pub preds: Vec<String>,
    pub golds: Vec<String>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Score every attribute; with `bootstrap`, documents are resampled jointly
/// across attributes so the attribute-averaged interval is coherent.
pub fn evaluate(outcomes: &[Outcomes], bootstrap: Option<&BootstrapConfig>) -> Result<EvalReport> {
    if outcomes.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let mut attributes = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        check_lengths(&o.preds, &o.golds)?;
        let classes = class_universe(&o.preds, &o.golds, None);
        let confusion = ConfusionMatrix::new(&o.preds, &o.golds, &classes)?;
        let mut r = AttributeReport {
            attribute: o.attribute.clone(),
            documents: o.preds.len(),
            micro_f1: micro_f1(&o.preds, &o.golds)?,
            macro_f1: macro_f1(&o.preds, &o.golds, None)?,
            per_class: per_class_metrics(&confusion),
            confusion,
            micro_f1_ci: None,
            macro_f1_ci: None,
        };
        if let Some(b) = bootstrap {
            r.micro_f1_ci = Some(bootstrap_ci(&o.preds, &o.golds, Metric::MicroF1, b)?.into());
            r.macro_f1_ci = Some(bootstrap_ci(&o.preds, &o.golds, Metric::MacroF1, b)?.into());
        }
        attributes.push(r);
    }
    let mut report = EvalReport {
        mean_micro_f1: mean(attributes.iter().map(|a| a.micro_f1)),
        mean_macro_f1: mean(attributes.iter().map(|a| a.macro_f1)),
        attributes,
        mean_micro_f1_ci: None,
        mean_macro_f1_ci: None,
    };
    if let Some(b) = bootstrap {
        let n = outcomes[0].preds.len();
        if outcomes.iter().all(|o| o.preds.len() == n) {
            let joint = |metric: Metric| {
                bootstrap_interval(n, b, |idx| {
                    let mut s = 0.0;
                    for o in outcomes {
                        let p: Vec<&str> = idx.iter().map(|&i| o.preds[i].as_str()).collect();
                        let g: Vec<&str> = idx.iter().map(|&i| o.golds[i].as_str()).collect();
                        s += metric.compute(&p, &g)?;
                    }
                    Ok(s / outcomes.len() as f64)
                })
            };
            report.mean_micro_f1_ci = Some(joint(Metric::MicroF1)?.into());
            report.mean_macro_f1_ci = Some(joint(Metric::MacroF1)?.into());
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub items: usize,
    pub fraction: f64,
    pub kappa: f64,
}

fn chance_corrected(observed: f64, expected: f64) -> f64 {
    if (1.0 - expected).abs() < 1e-15 {
        if (1.0 - observed).abs() < 1e-15 {
            1.0
        } else {
            0.0
        }
    } else {
        (observed - expected) / (1.0 - expected)
    }
}

/// Agreement fraction and kappa with chance agreement taken from the pooled
/// label frequencies of both annotators.
pub fn agreement<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<Agreement> {
    check_lengths(a, b)?;
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x.as_ref() == y.as_ref()).count() as f64 / n;
    let mut pooled: BTreeMap<&str, f64> = BTreeMap::new();
    for s in a.iter().chain(b) {
        *pooled.entry(s.as_ref()).or_default() += 1.0;
    }
    let expected = pooled.values().map(|c| (c / (2.0 * n)).powi(2)).sum();
    Ok(Agreement {
        items: a.len(),
        fraction: observed,
        kappa: chance_corrected(observed, expected),
    })
}

/// Kappa with chance agreement from each annotator's own marginals.
pub fn cohen_kappa<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<f64> {
    check_lengths(a, b)?;
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x.as_ref() == y.as_ref()).count() as f64 / n;
    let mut ma: BTreeMap<&str, f64> = BTreeMap::new();
    let mut mb: BTreeMap<&str, f64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x.as_ref()).or_default() += 1.0;
        *mb.entry(y.as_ref()).or_default() += 1.0;
    }
    let expected = ma
        .iter()
        .map(|(k, ca)| ca / n * mb.get(k).copied().unwrap_or(0.0) / n)
        .sum();
    Ok(chance_corrected(observed, expected))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    AttributeQualification,
    RarePhrasing,
    IrrelevantLines,
    MultiLabel,
    Annotator,
    Unknown,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 6] = [
        ErrorCategory::AttributeQualification,
        ErrorCategory::RarePhrasing,
        ErrorCategory::IrrelevantLines,
        ErrorCategory::MultiLabel,
        ErrorCategory::Annotator,
        ErrorCategory::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::AttributeQualification => "attribute_qualification",
            ErrorCategory::RarePhrasing => "rare_phrasing",
            ErrorCategory::IrrelevantLines => "irrelevant_lines",
            ErrorCategory::MultiLabel => "multi_label",
            ErrorCategory::Annotator => "annotator",
            ErrorCategory::Unknown => "unknown",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ErrorCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown error category {s:?}")))
    }
}

/// A manually assigned error label for one misclassified document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorAnnotation {
    pub id: String,
    pub attribute: String,
    pub category: ErrorCategory,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

/// Parse a line-delimited error-annotation file.
pub fn parse_error_annotations(text: &str) -> Result<Vec<ErrorAnnotation>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Count per category; every category appears, possibly with zero.
pub fn tally_errors(annotations: &[ErrorAnnotation]) -> BTreeMap<ErrorCategory, usize> {
    let mut t: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for a in annotations {
        *t.entry(a.category).or_default() += 1;
    }
    t
}
