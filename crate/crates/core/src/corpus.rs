//! Reports, enriched annotations, attribute schemas and the corpus file format.
//!
//! A corpus file holds one JSON record per line:
//!
//! ```text
//! {"id":"r1","cancer":"colon","lines":["...","..."],"annotations":[{"attribute":"grade","values":["grade 2"],"lines":[1],"scheme":"minimal"}]}
//! ```
//!
//! Line indices are 0-based positions in `lines`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Value used when a report does not mention the attribute.
pub const NOT_REPORTED: &str = "not reported";

/// Separator between values of a composed multi-value label.
pub const LABEL_JOINER: &str = " and ";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cancer {
    Colon,
    Kidney,
}

impl Cancer {
    pub const ALL: [Cancer; 2] = [Cancer::Colon, Cancer::Kidney];

    pub fn as_str(self) -> &'static str {
        match self {
            Cancer::Colon => "colon",
            Cancer::Kidney => "kidney",
        }
    }
}

impl fmt::Display for Cancer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cancer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "colon" => Ok(Cancer::Colon),
            "kidney" => Ok(Cancer::Kidney),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Only the first relevant line (synoptic comment if present) is highlighted.
    #[default]
    Minimal,
    /// Every relevant line is highlighted.
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub id: String,
    pub cancer: Cancer,
    pub lines: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnrichedAnnotation {
    pub attribute: String,
    pub values: Vec<String>,
    pub line_indices: BTreeSet<usize>,
    pub scheme: Scheme,
}

impl EnrichedAnnotation {
    pub fn is_not_reported(&self) -> bool {
        self.values.len() == 1 && self.values[0] == NOT_REPORTED
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDocument {
    pub report: Report,
    pub annotations: BTreeMap<String, EnrichedAnnotation>,
}

impl LabeledDocument {
    pub fn id(&self) -> &str {
        &self.report.id
    }

    pub fn annotation(&self, attribute: &str) -> Option<&EnrichedAnnotation> {
        self.annotations.get(attribute)
    }
}

/// Allowed values for one (cancer, attribute) pair, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeSchema {
    pub cancer: Cancer,
    pub attribute: String,
    pub allowed_values: Vec<String>,
}

impl AttributeSchema {
    pub fn position(&self, value: &str) -> Option<usize> {
        self.allowed_values.iter().position(|v| v == value)
    }
}

pub const SCHEMA_VERSION: u32 = 1;

const DEFAULT_SCHEMA: &str = include_str!("../data/schema.json");

/// All attribute schemas, keyed by cancer then attribute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSet {
    pub version: u32,
    pub cancers: BTreeMap<Cancer, BTreeMap<String, Vec<String>>>,
}

impl Default for SchemaSet {
    fn default() -> Self {
        Self::from_json(DEFAULT_SCHEMA).expect("embedded schema is valid")
    }
}

impl SchemaSet {
    pub fn from_json(text: &str) -> Result<Self> {
        let set: SchemaSet = serde_json::from_str(text)?;
        if set.version != SCHEMA_VERSION {
            return Err(Error::FormatVersion {
                expected: SCHEMA_VERSION,
                found: set.version,
            });
        }
        for (cancer, attrs) in &set.cancers {
            for (attr, values) in attrs {
                let unique: HashSet<&String> = values.iter().collect();
                if values.is_empty() || unique.len() != values.len() {
                    return Err(Error::invalid(format!(
                        "schema {cancer}/{attr}: allowed values must be nonempty and duplicate-free"
                    )));
                }
            }
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn get(&self, cancer: Cancer, attribute: &str) -> Option<AttributeSchema> {
        let values = self.cancers.get(&cancer)?.get(attribute)?;
        Some(AttributeSchema {
            cancer,
            attribute: attribute.to_string(),
            allowed_values: values.clone(),
        })
    }

    pub fn attributes(&self, cancer: Cancer) -> Vec<&str> {
        self.cancers
            .get(&cancer)
            .map(|m| m.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    fn allowed(&self, cancer: Cancer, attribute: &str) -> Option<&[String]> {
        self.cancers.get(&cancer)?.get(attribute).map(Vec::as_slice)
    }

    /// Schema rank of each value; unknown values sort after known ones.
    fn rank(&self, cancer: Cancer, attribute: &str, value: &str) -> usize {
        self.allowed(cancer, attribute)
            .and_then(|vals| vals.iter().position(|v| v == value))
            .unwrap_or(usize::MAX)
    }

    /// The composed gold label of `doc` for `attribute`.
    pub fn gold(&self, doc: &LabeledDocument, attribute: &str) -> Option<GoldLabel> {
        let ann = doc.annotation(attribute)?;
        let order = self.allowed(doc.report.cancer, attribute).unwrap_or(&[]);
        let mut sorted = ann.values.clone();
        sort_by_schema(&mut sorted, order);
        let rank = sorted
            .iter()
            .map(|v| self.rank(doc.report.cancer, attribute, v))
            .collect();
        Some(GoldLabel {
            label: sorted.join(LABEL_JOINER),
            rank,
        })
    }
}

/// A composed label plus its schema rank, used to order classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldLabel {
    pub label: String,
    pub rank: Vec<usize>,
}

/// Distinct labels ordered by schema rank, then text.
pub fn class_order(golds: &[GoldLabel]) -> Vec<String> {
    let mut seen: BTreeMap<(&[usize], &str), ()> = BTreeMap::new();
    for g in golds {
        seen.insert((g.rank.as_slice(), g.label.as_str()), ());
    }
    let mut out: Vec<String> = Vec::new();
    for (_, label) in seen.keys() {
        if !out.iter().any(|l| l == label) {
            out.push(label.to_string());
        }
    }
    out
}

fn sort_by_schema(values: &mut [String], order: &[String]) {
    values.sort_by(|a, b| {
        let ra = order.iter().position(|v| v == a).unwrap_or(usize::MAX);
        let rb = order.iter().position(|v| v == b).unwrap_or(usize::MAX);
        ra.cmp(&rb).then_with(|| a.cmp(b))
    });
}

/// Join a multi-value annotation into a single label, values in schema order.
///
/// A single value is returned verbatim. Values missing from `schema_order`
/// sort after the known ones, alphabetically.
pub fn compose_label(values: &[String], schema_order: &[String]) -> Result<String> {
    if values.is_empty() {
        return Err(Error::invalid("cannot compose a label from zero values"));
    }
    let mut sorted: Vec<String> = values.to_vec();
    sort_by_schema(&mut sorted, schema_order);
    sorted.dedup();
    Ok(sorted.join(LABEL_JOINER))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub id: String,
    pub attribute: String,
    pub value: Option<String>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_against_schema(docs: &[LabeledDocument], schemas: &SchemaSet) -> ValidationReport {
    let mut violations = Vec::new();
    for doc in docs {
        for (attr, ann) in &doc.annotations {
            let Some(allowed) = schemas.allowed(doc.report.cancer, attr) else {
                violations.push(Violation {
                    id: doc.id().to_string(),
                    attribute: attr.clone(),
                    value: None,
                    reason: format!("unknown attribute for {} cancer", doc.report.cancer),
                });
                continue;
            };
            for v in &ann.values {
                if !allowed.contains(v) {
                    violations.push(Violation {
                        id: doc.id().to_string(),
                        attribute: attr.clone(),
                        value: Some(v.clone()),
                        reason: format!("value not allowed (allowed: {})", allowed.join(", ")),
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordRepr {
    id: String,
    cancer: String,
    lines: Vec<String>,
    #[serde(default)]
    annotations: Vec<AnnotationRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRepr {
    attribute: String,
    values: Vec<String>,
    lines: Vec<usize>,
    scheme: Scheme,
}

fn record_to_doc(rec: RecordRepr, line: usize) -> Result<LabeledDocument> {
    let invalid = |reason: String| Error::InvalidRecord {
        id: rec.id.clone(),
        line,
        reason,
    };
    if rec.id.is_empty() {
        return Err(Error::MalformedRecord {
            line,
            reason: "empty id".into(),
        });
    }
    let cancer: Cancer = rec
        .cancer
        .parse()
        .map_err(|cancer| Error::UnknownCancer { line, cancer })?;
    if rec.lines.is_empty() {
        return Err(invalid("report has no lines".into()));
    }
    if rec
        .lines
        .iter()
        .any(|l| l.contains('\n') || l.contains('\r'))
    {
        return Err(invalid("line text contains a newline".into()));
    }
    let mut annotations = BTreeMap::new();
    for a in &rec.annotations {
        if a.values.is_empty() {
            return Err(invalid(format!(
                "annotation {:?} has no values",
                a.attribute
            )));
        }
        let mut values: Vec<String> = Vec::with_capacity(a.values.len());
        for v in &a.values {
            if !values.contains(v) {
                values.push(v.clone());
            }
        }
        if let Some(&bad) = a.lines.iter().find(|&&i| i >= rec.lines.len()) {
            return Err(invalid(format!(
                "annotation {:?} highlights line {bad} but the report has {} lines",
                a.attribute,
                rec.lines.len()
            )));
        }
        let ann = EnrichedAnnotation {
            attribute: a.attribute.clone(),
            values,
            line_indices: a.lines.iter().copied().collect(),
            scheme: a.scheme,
        };
        if ann.line_indices.is_empty() && !ann.is_not_reported() {
            return Err(invalid(format!(
                "annotation {:?} highlights no lines but is not {NOT_REPORTED:?}",
                a.attribute
            )));
        }
        if annotations.insert(a.attribute.clone(), ann).is_some() {
            return Err(invalid(format!(
                "attribute {:?} annotated twice",
                a.attribute
            )));
        }
    }
    Ok(LabeledDocument {
        report: Report {
            id: rec.id.clone(),
            cancer,
            lines: rec.lines.clone(),
        },
        annotations,
    })
}

fn doc_to_record(doc: &LabeledDocument) -> RecordRepr {
    RecordRepr {
        id: doc.report.id.clone(),
        cancer: doc.report.cancer.as_str().to_string(),
        lines: doc.report.lines.clone(),
        annotations: doc
            .annotations
            .values()
            .map(|a| AnnotationRepr {
                attribute: a.attribute.clone(),
                values: a.values.clone(),
                lines: a.line_indices.iter().copied().collect(),
                scheme: a.scheme,
            })
            .collect(),
    }
}

/// Parse corpus text. Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_corpus(text: &str) -> Result<Vec<LabeledDocument>> {
    let mut docs = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: RecordRepr = serde_json::from_str(raw).map_err(|e| Error::MalformedRecord {
            line,
            reason: e.to_string(),
        })?;
        let doc = record_to_doc(rec, line)?;
        if !ids.insert(doc.report.id.clone()) {
            return Err(Error::DuplicateId(doc.report.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: &Path) -> Result<Vec<LabeledDocument>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

/// Canonical corpus text: one compact record per document, newline-terminated.
pub fn format_corpus(docs: &[LabeledDocument]) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(
            &serde_json::to_string(&doc_to_record(doc)).expect("corpus records serialize"),
        );
        out.push('\n');
    }
    out
}

pub fn save_corpus(path: &Path, docs: &[LabeledDocument]) -> Result<()> {
    fs::write(path, format_corpus(docs)).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

/// Shuffle-split into `train_size` training documents and the rest for testing.
/// Both sides keep corpus order.
pub fn split_corpus(docs: &[LabeledDocument], train_size: usize, seed: u64) -> Result<Split> {
    if train_size == 0 || train_size >= docs.len() {
        return Err(Error::invalid(format!(
            "train size {train_size} out of range for a corpus of {} documents",
            docs.len()
        )));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut rng::stream(seed, &[0x5917]));
    let mut train: Vec<usize> = order[..train_size].to_vec();
    let mut test: Vec<usize> = order[train_size..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    let ids = |idx: &[usize]| idx.iter().map(|&i| docs[i].report.id.clone()).collect();
    Ok(Split {
        train_ids: ids(&train),
        test_ids: ids(&test),
        seed,
    })
}

/// Resolve ids to documents, preserving the id order.
pub fn select<'a>(docs: &'a [LabeledDocument], ids: &[String]) -> Vec<&'a LabeledDocument> {
    let index: BTreeMap<&str, &LabeledDocument> = docs.iter().map(|d| (d.id(), d)).collect();
    ids.iter()
        .filter_map(|id| index.get(id.as_str()).copied())
        .collect()
}
