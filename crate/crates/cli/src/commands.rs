use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use sla::corpus::{self, Cancer, LabeledDocument, SchemaSet, Scheme};
use sla::eval::curve::{learning_curve as run_curve, CurveConfig};
use sla::eval::{self, BootstrapConfig, Outcomes};
use sla::pipeline::{self, Config, Method, ModelBundle};
use sla::sla::{segment_text, KeywordRules};
use sla::stage::StageRecord;
use sla::synth::{self, GenConfig};
use sla::tuning::{random_search, SearchSpace, TuneSpec, DEFAULT_FOLDS, DEFAULT_TRIALS};

use crate::manifest::Recorder;
use crate::{AttrArgs, CliError, CorpusArgs};

fn load_schemas(path: Option<&Path>) -> Result<SchemaSet, CliError> {
    Ok(match path {
        Some(p) => SchemaSet::load(p)?,
        None => SchemaSet::default(),
    })
}

struct Loaded {
    docs: Vec<LabeledDocument>,
    schemas: SchemaSet,
}

fn load(args: &CorpusArgs, rec: Option<&mut Recorder>) -> Result<Loaded, CliError> {
    let docs = corpus::load_corpus(&args.corpus)?;
    let schemas = load_schemas(args.schema.as_deref())?;
    if let Some(rec) = rec {
        rec.input(&args.corpus);
        if let Some(s) = &args.schema {
            rec.input(s);
        }
    }
    Ok(Loaded { docs, schemas })
}

/// Requested attributes, or those annotated on every document.
fn attributes(args: &AttrArgs, docs: &[LabeledDocument]) -> Result<Vec<String>, CliError> {
    if !args.attribute.is_empty() {
        return Ok(args.attribute.clone());
    }
    let mut common: Option<BTreeSet<String>> = None;
    for d in docs {
        let keys: BTreeSet<String> = d.annotations.keys().cloned().collect();
        common = Some(match common {
            None => keys,
            Some(c) => c.intersection(&keys).cloned().collect(),
        });
    }
    let attrs: Vec<String> = common.unwrap_or_default().into_iter().collect();
    if attrs.is_empty() {
        return Err(CliError::Data("no attribute is annotated on every document".into()));
    }
    Ok(attrs)
}

fn load_rules(path: Option<&Path>, rec: &mut Recorder) -> Result<Option<KeywordRules>, CliError> {
    match path {
        Some(p) => {
            rec.input(p);
            Ok(Some(KeywordRules::load(p)?))
        }
        None => Ok(None),
    }
}

fn load_space(path: Option<&Path>, method: Method, rec: &mut Recorder) -> Result<SearchSpace, CliError> {
    match path {
        Some(p) => {
            rec.input(p);
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Ok(SearchSpace::from_json(&text)?)
        }
        None => Ok(SearchSpace::default_for(method)),
    }
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    s.parse().map_err(|e: sla::Error| CliError::Usage(e.to_string()))
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Generator config file; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cancer: Option<String>,
    #[arg(long)]
    pub num_docs: Option<usize>,
    /// minimal or full highlight scheme.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth(a: SynthArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut rec = Recorder::new("synth", argv, a.out.clone());
    let cancer: Option<Cancer> = a
        .cancer
        .as_deref()
        .map(|c| c.parse().map_err(|e: String| CliError::Usage(format!("unknown cancer {e:?}"))))
        .transpose()?;
    let mut cfg = match &a.config {
        Some(p) => {
            rec.input(p);
            GenConfig::load(p)?
        }
        None => GenConfig::for_cancer(cancer.unwrap_or(Cancer::Colon), 250, 0),
    };
    if let Some(c) = cancer {
        if a.config.is_some() && c != cfg.cancer {
            return Err(CliError::Usage("--cancer conflicts with the config file".into()));
        }
    }
    if let Some(n) = a.num_docs {
        cfg.num_docs = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = &a.scheme {
        cfg.scheme = match s.as_str() {
            "minimal" => Scheme::Minimal,
            "full" => Scheme::Full,
            _ => return Err(CliError::Usage(format!("unknown scheme {s:?}"))),
        };
    }
    let docs = synth::generate_corpus(&cfg)?;
    rec.write("corpus.jsonl", corpus::format_corpus(&docs).as_bytes())?;
    rec.write_json("gold_summary.json", &synth::describe_gold(&docs, &SchemaSet::default()))?;
    println!("wrote {} documents to {}", docs.len(), rec.output_path("corpus.jsonl").display());
    rec.finish(to_value(&cfg), json!({ "seed": cfg.seed }), false)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Directory for validation.json and a manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn validate(a: ValidateArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut rec = a.out.clone().map(|o| Recorder::new("validate", argv, o));
    let loaded = load(&a.corpus, rec.as_mut())?;
    let report = corpus::validate_against_schema(&loaded.docs, &loaded.schemas);
    for v in &report.violations {
        eprintln!("{}: {} = {:?}: {}", v.id, v.attribute, v.value, v.reason);
    }
    println!("{} documents, {} violations", loaded.docs.len(), report.violations.len());
    if let Some(mut rec) = rec {
        rec.write_json("validation.json", &report)?;
        rec.finish(json!({ "documents": loaded.docs.len() }), json!({}), false)?;
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} schema violations", report.violations.len())))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSet {
    pub version: u32,
    pub models: Vec<ModelBundle>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub attrs: AttrArgs,
    #[arg(long, default_value = "sla")]
    pub variant: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hyperparameters: a flat name → value map, or `best.json` from `tune`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Keyword rules for the rules variant.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn params_for(value: Option<&serde_json::Value>, attribute: &str, method: Method) -> Result<Config, CliError> {
    let Some(v) = value else {
        return Ok(method.default_config());
    };
    let bad = |e: serde_json::Error| CliError::Data(format!("bad --params file: {e}"));
    if let Some(entry) = v.get(attribute).and_then(|e| e.get("config")) {
        return serde_json::from_value(entry.clone()).map_err(bad);
    }
    let flat: Config = serde_json::from_value(v.clone()).map_err(bad)?;
    let mut c = method.default_config();
    c.extend(flat);
    Ok(c)
}

pub fn train(a: TrainArgs, argv: Vec<String>) -> Result<(), CliError> {
    let method = parse_method(&a.variant)?;
    let mut rec = Recorder::new("train", argv, a.out.clone());
    let loaded = load(&a.corpus, Some(&mut rec))?;
    let rules = load_rules(a.rules.as_deref(), &mut rec)?;
    let params: Option<serde_json::Value> = match &a.params {
        Some(p) => {
            rec.input(p);
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let attrs = attributes(&a.attrs, &loaded.docs)?;
    let docs: Vec<&LabeledDocument> = loaded.docs.iter().collect();
    let mut models = Vec::new();
    let mut configs = BTreeMap::new();
    for (i, attr) in attrs.iter().enumerate() {
        let config = params_for(params.as_ref(), attr, method)?;
        let seed = sla::rng::derive_seed(a.seed, &[i as u64]);
        models.push(pipeline::train(method, &docs, attr, &loaded.schemas, &config, seed, rules.as_ref())?);
        configs.insert(attr.clone(), config);
    }
    rec.write_json("model.json", &ModelSet { version: 1, models })?;
    println!("trained {} model(s) with {method}", attrs.len());
    rec.finish(
        json!({ "variant": method, "attributes": attrs, "params": configs }),
        json!({ "seed": a.seed }),
        false,
    )?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// `model.json` from `train`, or its directory.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationaleLine {
    pub start_line: usize,
    pub end_line: usize,
    pub weight: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub attribute: String,
    pub label: String,
    pub scores: BTreeMap<String, f64>,
    pub rationale: Vec<RationaleLine>,
}

pub fn predict(a: PredictArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut rec = Recorder::new("predict", argv, a.out.clone());
    let loaded = load(&a.corpus, Some(&mut rec))?;
    let model_path = if a.model.is_dir() { a.model.join("model.json") } else { a.model.clone() };
    let text = fs::read_to_string(&model_path).map_err(|e| CliError::Data(format!("{}: {e}", model_path.display())))?;
    rec.input(&model_path);
    let set: ModelSet =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", model_path.display())))?;
    let mut out = String::new();
    let mut count = 0;
    for doc in &loaded.docs {
        for bundle in &set.models {
            let p = pipeline::predict(bundle, doc)?;
            let record = PredictionRecord {
                id: doc.id().to_string(),
                attribute: bundle.attribute.clone(),
                label: p.label,
                scores: p.scores,
                rationale: p
                    .rationale
                    .segments
                    .iter()
                    .map(|s| RationaleLine {
                        start_line: s.start_line,
                        end_line: s.end_line,
                        weight: s.weight,
                        text: segment_text(&doc.report, s),
                    })
                    .collect(),
            };
            out.push_str(&serde_json::to_string(&record).map_err(|e| CliError::Internal(e.to_string()))?);
            out.push('\n');
            count += 1;
        }
    }
    rec.write("predictions.jsonl", out.as_bytes())?;
    println!("wrote {count} predictions");
    let methods: Vec<String> = set.models.iter().map(|m| m.method.to_string()).collect();
    rec.finish(json!({ "models": methods }), json!({}), false)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// `predictions.jsonl` from `predict`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Optional manual error-category annotations.
    #[arg(long)]
    pub errors: Option<PathBuf>,
    /// Bootstrap resamples for confidence intervals; 0 disables them.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn evaluate(a: EvaluateArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut rec = Recorder::new("evaluate", argv, a.out.clone());
    let loaded = load(&a.corpus, Some(&mut rec))?;
    let text = fs::read_to_string(&a.predictions)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.predictions.display())))?;
    rec.input(&a.predictions);
    let mut by_attr: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: PredictionRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Data(format!("{} line {}: {e}", a.predictions.display(), i + 1)))?;
        by_attr.entry(r.attribute).or_default().insert(r.id, r.label);
    }
    let mut outcomes = Vec::new();
    for (attr, preds) in &by_attr {
        let mut o = Outcomes {
            attribute: attr.clone(),
            preds: Vec::new(),
            golds: Vec::new(),
        };
        for doc in &loaded.docs {
            let gold = loaded
                .schemas
                .gold(doc, attr)
                .ok_or_else(|| CliError::Data(format!("{}: no gold {attr} annotation", doc.id())))?;
            let pred = preds
                .get(doc.id())
                .ok_or_else(|| CliError::Data(format!("{}: no {attr} prediction", doc.id())))?;
            o.preds.push(pred.clone());
            o.golds.push(gold.label);
        }
        outcomes.push(o);
    }
    let boot = BootstrapConfig {
        iterations: a.bootstrap,
        seed: a.seed,
        ..BootstrapConfig::default()
    };
    let report = eval::evaluate(&outcomes, (a.bootstrap > 0).then_some(&boot))?;
    let mut metrics = json!({ "report": report });
    if let Some(p) = &a.errors {
        rec.input(p);
        let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        let anns = eval::parse_error_annotations(&text)?;
        metrics["error_categories"] = to_value(&eval::tally_errors(&anns));
    }
    rec.write_json("metrics.json", &metrics)?;
    for r in &report.attributes {
        println!("{}\tmicro-F1 {:.4}\tmacro-F1 {:.4}", r.attribute, r.micro_f1, r.macro_f1);
    }
    println!("mean\tmicro-F1 {:.4}\tmacro-F1 {:.4}", report.mean_micro_f1, report.mean_macro_f1);
    rec.finish(to_value(&boot), json!({ "seed": a.seed }), false)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub attrs: AttrArgs,
    #[arg(long, default_value = "sla")]
    pub variant: String,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Search-space file; defaults to the standard space for the variant.
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn tune(a: TuneArgs, argv: Vec<String>) -> Result<(), CliError> {
    let method = parse_method(&a.variant)?;
    let mut rec = Recorder::new("tune", argv, a.out.clone());
    let loaded = load(&a.corpus, Some(&mut rec))?;
    let rules = load_rules(a.rules.as_deref(), &mut rec)?;
    let space = load_space(a.space.as_deref(), method, &mut rec)?;
    let attrs = attributes(&a.attrs, &loaded.docs)?;
    let docs: Vec<&LabeledDocument> = loaded.docs.iter().collect();
    let mut log = String::new();
    let mut best = BTreeMap::new();
    let mut seeds = BTreeMap::new();
    for (i, attr) in attrs.iter().enumerate() {
        let seed = sla::rng::derive_seed(a.seed, &[i as u64]);
        seeds.insert(attr.clone(), seed);
        let spec = TuneSpec {
            method,
            attribute: attr,
            schemas: &loaded.schemas,
            rules: rules.as_ref(),
            folds: a.folds,
            seed,
        };
        let result = random_search(&docs, &spec, &space, a.trials)?;
        for t in &result.trials {
            let mut v = to_value(t);
            v["attribute"] = json!(attr);
            log.push_str(&v.to_string());
            log.push('\n');
        }
        println!(
            "{attr}: best trial {} with CV micro-F1 {:.4}",
            result.best_trial, result.best_score
        );
        best.insert(
            attr.clone(),
            json!({
                "best_trial": result.best_trial,
                "mean_micro_f1": result.best_score,
                "config": result.best_config,
            }),
        );
    }
    rec.write("trials.jsonl", log.as_bytes())?;
    rec.write_json("best.json", &best)?;
    rec.finish(
        json!({
            "variant": method,
            "attributes": attrs,
            "trials": a.trials,
            "folds": a.folds,
            "space": space,
        }),
        json!({ "seed": a.seed, "per_attribute": seeds }),
        false,
    )?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub attrs: AttrArgs,
    #[arg(long, default_value = "sla")]
    pub variant: String,
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,186")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    /// Bootstrap resamples per confidence interval.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Resolve the configuration and write only the manifest.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn learning_curve(a: CurveArgs, argv: Vec<String>) -> Result<(), CliError> {
    let method = parse_method(&a.variant)?;
    let mut rec = Recorder::new("learning-curve", argv, a.out.clone());
    let loaded = load(&a.corpus, Some(&mut rec))?;
    let rules = load_rules(a.rules.as_deref(), &mut rec)?;
    let space = load_space(a.space.as_deref(), method, &mut rec)?;
    let mut cfg = CurveConfig::new(method, attributes(&a.attrs, &loaded.docs)?, a.seed);
    cfg.sizes = a.sizes.clone();
    cfg.runs = a.runs;
    cfg.trials = a.trials;
    cfg.folds = a.folds;
    cfg.bootstrap.iterations = a.bootstrap;
    cfg.space = Some(space);
    let seeds = json!({ "seed": a.seed, "bootstrap": cfg.bootstrap.seed });
    if a.dry_run {
        rec.finish(to_value(&cfg), seeds, true)?;
        println!("dry run: wrote {}", a.out.join("manifest.json").display());
        return Ok(());
    }
    let curve = run_curve(&loaded.docs, &loaded.schemas, rules.as_ref(), &cfg)?;
    rec.write_json("curve.json", &curve)?;
    rec.write("curve.tsv", curve.to_tsv().as_bytes())?;
    for p in &curve.points {
        println!(
            "size {:>4}\tmicro-F1 {:.4} [{:.4}, {:.4}]\tmacro-F1 {:.4} [{:.4}, {:.4}]",
            p.size,
            p.mean_micro_f1,
            p.micro_f1_ci.lo,
            p.micro_f1_ci.hi,
            p.mean_macro_f1,
            p.macro_f1_ci.lo,
            p.macro_f1_ci.hi
        );
    }
    rec.finish(to_value(&cfg), seeds, false)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct AgreementArgs {
    /// Annotator A's corpus.
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Annotator B's corpus over the same report ids.
    #[arg(long)]
    pub corpus_b: PathBuf,
    #[command(flatten)]
    pub attrs: AttrArgs,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn agreement(a: AgreementArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut rec = Recorder::new("agreement", argv, a.out.clone());
    let loaded = load(&a.corpus, Some(&mut rec))?;
    let other = corpus::load_corpus(&a.corpus_b)?;
    rec.input(&a.corpus_b);
    let b_by_id: BTreeMap<&str, &LabeledDocument> = other.iter().map(|d| (d.id(), d)).collect();
    let attrs = attributes(&a.attrs, &loaded.docs)?;
    let mut rows = Vec::new();
    let (mut all_a, mut all_b) = (Vec::new(), Vec::new());
    for attr in &attrs {
        let (mut la, mut lb) = (Vec::new(), Vec::new());
        for d in &loaded.docs {
            let db = b_by_id
                .get(d.id())
                .ok_or_else(|| CliError::Data(format!("{} is missing from --corpus-b", d.id())))?;
            let ga = loaded.schemas.gold(d, attr);
            let gb = loaded.schemas.gold(db, attr);
            match (ga, gb) {
                (Some(x), Some(y)) => {
                    la.push(x.label);
                    lb.push(y.label);
                }
                _ => return Err(CliError::Data(format!("{}: {attr} not annotated by both", d.id()))),
            }
        }
        let r = eval::agreement(&la, &lb)?;
        rows.push(json!({
            "attribute": attr,
            "items": r.items,
            "fraction": r.fraction,
            "kappa": r.kappa,
            "cohen_kappa": eval::cohen_kappa(&la, &lb)?,
        }));
        println!("{attr}\tagreement {:.4}\tkappa {:.4}", r.fraction, r.kappa);
        all_a.extend(la.into_iter().map(|l| format!("{attr}={l}")));
        all_b.extend(lb.into_iter().map(|l| format!("{attr}={l}")));
    }
    let overall = eval::agreement(&all_a, &all_b)?;
    rec.write_json("agreement.json", &json!({ "attributes": rows, "overall": overall }))?;
    rec.finish(json!({ "attributes": attrs }), json!({}), false)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct StageArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn stage(a: StageArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut rec = Recorder::new("stage", argv, a.out.clone());
    let loaded = load(&a.corpus, Some(&mut rec))?;
    let mut out = String::new();
    let mut found = 0;
    for d in &loaded.docs {
        let r = StageRecord::for_report(&d.report);
        found += usize::from(r.token.is_some());
        out.push_str(&serde_json::to_string(&r).map_err(|e| CliError::Internal(e.to_string()))?);
        out.push('\n');
    }
    rec.write("stages.jsonl", out.as_bytes())?;
    println!("{found} of {} reports carry a stage token", loaded.docs.len());
    rec.finish(json!({}), json!({}), false)?;
    Ok(())
}
