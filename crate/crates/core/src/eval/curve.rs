//! Learning curves: tune and evaluate on reshuffled splits at several
//! training-set sizes, then average across runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, quantile, BootstrapConfig, EvalReport, Interval, Metric, Outcomes};
use crate::corpus::{select, split_corpus, LabeledDocument, SchemaSet};
use crate::error::{Error, Result};
use crate::pipeline::{predict, train, Config, Method};
use crate::rng;
use crate::sla::KeywordRules;
use crate::tuning::{random_search, SearchSpace, TuneSpec, DEFAULT_FOLDS, DEFAULT_TRIALS};

pub const DEFAULT_SIZES: [usize; 4] = [32, 64, 128, 186];
pub const DEFAULT_RUNS: usize = 10;

const SPLIT_TAG: u64 = 0x5B17;
const TUNE_TAG: u64 = 0x7E4E;
const FIT_TAG: u64 = 0xF17;
const CI_TAG: u64 = 0xC1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveConfig {
    pub method: Method,
    pub attributes: Vec<String>,
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub trials: usize,
    pub folds: usize,
    pub bootstrap: BootstrapConfig,
    pub base_seed: u64,
    /// Overrides the default space for `method`.
    pub space: Option<SearchSpace>,
}

impl CurveConfig {
    pub fn new(method: Method, attributes: Vec<String>, base_seed: u64) -> Self {
        CurveConfig {
            method,
            attributes,
            sizes: DEFAULT_SIZES.to_vec(),
            runs: DEFAULT_RUNS,
            trials: DEFAULT_TRIALS,
            folds: DEFAULT_FOLDS,
            bootstrap: BootstrapConfig {
                seed: rng::derive_seed(base_seed, &[CI_TAG]),
                ..BootstrapConfig::default()
            },
            base_seed,
            space: None,
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        self.space.clone().unwrap_or_else(|| SearchSpace::default_for(self.method))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuned {
    pub best_trial: usize,
    pub cv_micro_f1: f64,
    pub config: Config,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveCell {
    pub size: usize,
    pub run: usize,
    pub split_seed: u64,
    pub test_ids: Vec<String>,
    pub tuned: BTreeMap<String, Tuned>,
    pub outcomes: Vec<Outcomes>,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub runs: usize,
    pub mean_micro_f1: f64,
    pub mean_macro_f1: f64,
    pub micro_f1_ci: Interval,
    pub macro_f1_ci: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub config: CurveConfig,
    pub cells: Vec<CurveCell>,
    pub points: Vec<CurvePoint>,
}

/// Train (after tuning, when `trials > 0`) on one split and score the rest.
fn run_cell(
    corpus: &[LabeledDocument],
    schemas: &SchemaSet,
    rules: Option<&KeywordRules>,
    cfg: &CurveConfig,
    space: &SearchSpace,
    size: usize,
    run: usize,
) -> Result<CurveCell> {
    let split_seed = rng::derive_seed(cfg.base_seed, &[SPLIT_TAG, run as u64]);
    let split = split_corpus(corpus, size, split_seed)?;
    let train_docs = select(corpus, &split.train_ids);
    let test_docs = select(corpus, &split.test_ids);
    let mut tuned = BTreeMap::new();
    let mut outcomes = Vec::new();
    for (ai, attribute) in cfg.attributes.iter().enumerate() {
        let tags = [size as u64, run as u64, ai as u64];
        let spec = TuneSpec {
            method: cfg.method,
            attribute,
            schemas,
            rules,
            folds: cfg.folds,
            seed: rng::derive_seed(cfg.base_seed, &[&[TUNE_TAG][..], &tags].concat()),
        };
        let search = random_search(&train_docs, &spec, space, cfg.trials)?;
        let fit_seed = rng::derive_seed(cfg.base_seed, &[&[FIT_TAG][..], &tags].concat());
        let bundle = train(cfg.method, &train_docs, attribute, schemas, &search.best_config, fit_seed, rules)?;
        let mut preds = Vec::with_capacity(test_docs.len());
        let mut golds = Vec::with_capacity(test_docs.len());
        for d in &test_docs {
            preds.push(predict(&bundle, d)?.label);
            golds.push(
                schemas
                    .gold(d, attribute)
                    .ok_or_else(|| Error::MissingAnnotation {
                        id: d.id().to_string(),
                        attribute: attribute.clone(),
                    })?
                    .label,
            );
        }
        tuned.insert(
            attribute.clone(),
            Tuned {
                best_trial: search.best_trial,
                cv_micro_f1: search.best_score,
                config: search.best_config,
            },
        );
        outcomes.push(Outcomes {
            attribute: attribute.clone(),
            preds,
            golds,
        });
    }
    let boot = BootstrapConfig {
        seed: rng::derive_seed(cfg.bootstrap.seed, &[size as u64, run as u64]),
        ..cfg.bootstrap.clone()
    };
    let report = evaluate(&outcomes, Some(&boot))?;
    Ok(CurveCell {
        size,
        run,
        split_seed,
        test_ids: split.test_ids,
        tuned,
        outcomes,
        report,
    })
}

/// Attribute-averaged metric of one run's resampled documents.
fn resampled_mean(outcomes: &[Outcomes], idx: &[usize], metric: Metric) -> Result<f64> {
    let mut s = 0.0;
    for o in outcomes {
        let p: Vec<&str> = idx.iter().map(|&i| o.preds[i].as_str()).collect();
        let g: Vec<&str> = idx.iter().map(|&i| o.golds[i].as_str()).collect();
        s += metric.compute(&p, &g)?;
    }
    Ok(s / outcomes.len() as f64)
}

/// Interval for the run-averaged metric: each iteration resamples the test
/// documents of every run independently, then averages across runs.
fn point_interval(cells: &[&CurveCell], metric: Metric, cfg: &BootstrapConfig, size: usize) -> Result<Interval> {
    let mut rng = rng::stream(cfg.seed, &[size as u64, metric as u64]);
    let mut values = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let mut total = 0.0;
        for c in cells {
            let n = c.test_ids.len();
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            total += resampled_mean(&c.outcomes, &idx, metric)?;
        }
        values.push(total / cells.len() as f64);
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.level) / 2.0;
    Ok(Interval {
        lo: quantile(&values, tail),
        hi: quantile(&values, 1.0 - tail),
    })
}

pub fn learning_curve(
    corpus: &[LabeledDocument],
    schemas: &SchemaSet,
    rules: Option<&KeywordRules>,
    cfg: &CurveConfig,
) -> Result<LearningCurve> {
    cfg.bootstrap.validate()?;
    if cfg.attributes.is_empty() || cfg.sizes.is_empty() || cfg.runs == 0 {
        return Err(Error::invalid("a learning curve needs attributes, sizes and runs"));
    }
    if let Some(&bad) = cfg.sizes.iter().find(|&&s| s == 0 || s >= corpus.len()) {
        return Err(Error::invalid(format!(
            "training size {bad} must be between 1 and {} for a corpus of {}",
            corpus.len().saturating_sub(1),
            corpus.len()
        )));
    }
    let space = cfg.search_space();
    space.validate()?;
    let grid: Vec<(usize, usize)> = cfg
        .sizes
        .iter()
        .flat_map(|&s| (0..cfg.runs).map(move |r| (s, r)))
        .collect();
    let cells: Vec<CurveCell> = grid
        .par_iter()
        .map(|&(size, run)| run_cell(corpus, schemas, rules, cfg, &space, size, run))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let group: Vec<&CurveCell> = cells.iter().filter(|c| c.size == size).collect();
        let n = group.len() as f64;
        points.push(CurvePoint {
            size,
            runs: group.len(),
            mean_micro_f1: group.iter().map(|c| c.report.mean_micro_f1).sum::<f64>() / n,
            mean_macro_f1: group.iter().map(|c| c.report.mean_macro_f1).sum::<f64>() / n,
            micro_f1_ci: point_interval(&group, Metric::MicroF1, &cfg.bootstrap, size)?,
            macro_f1_ci: point_interval(&group, Metric::MacroF1, &cfg.bootstrap, size)?,
        });
    }
    Ok(LearningCurve {
        config: cfg.clone(),
        cells,
        points,
    })
}

impl LearningCurve {
    /// One row per attribute, size and run.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "method\tattribute\tsize\trun\tmicro_f1\tmacro_f1\tmicro_lo\tmicro_hi\tmacro_lo\tmacro_hi\n",
        );
        for c in &self.cells {
            for a in &c.report.attributes {
                let ci = |i: &Option<Interval>| i.as_ref().map_or((f64::NAN, f64::NAN), |i| (i.lo, i.hi));
                let (ml, mh) = ci(&a.micro_f1_ci);
                let (al, ah) = ci(&a.macro_f1_ci);
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                    self.config.method, a.attribute, c.size, c.run, a.micro_f1, a.macro_f1, ml, mh, al, ah
                );
            }
        }
        out
    }
}
