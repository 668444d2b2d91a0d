//! Supervised Line Attention: score lines for relevance, keep the top k,
//! join adjacent picks, and classify the score-weighted sum of their n-gram
//! vectors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{class_order, GoldLabel, LabeledDocument, Report, SchemaSet};
use crate::error::{Error, Result};
use crate::learners::{train_gbt, train_l1_logreg, GbtModel, GbtParams, LinParams, LinearModel};
use crate::textproc::{
    tokenize, tokenize_lines, SparseVector, TokenLine, Vocabulary, DEFAULT_MIN_COUNT,
};

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Sla,
    Rules,
    Oracle,
    NoWeight,
    NoJoin,
    NoWeightNoJoin,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Sla,
        Variant::Rules,
        Variant::Oracle,
        Variant::NoWeight,
        Variant::NoJoin,
        Variant::NoWeightNoJoin,
    ];

    /// Segments are scaled by their line scores.
    pub fn weighting(self) -> bool {
        matches!(self, Variant::Sla | Variant::NoJoin)
    }

    pub fn joining(self) -> bool {
        !matches!(self, Variant::NoJoin | Variant::NoWeightNoJoin)
    }

    /// Lines are picked by a trained relevance model.
    pub fn uses_scorer(self) -> bool {
        !matches!(self, Variant::Rules | Variant::Oracle)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Sla => "sla",
            Variant::Rules => "rules",
            Variant::Oracle => "oracle",
            Variant::NoWeight => "no-weight",
            Variant::NoJoin => "no-join",
            Variant::NoWeightNoJoin => "no-weight-no-join",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('_', "-");
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == key)
            .ok_or_else(|| Error::invalid(format!("unknown SLA variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlaHyperParams {
    pub line_ngram_n: usize,
    pub final_ngram_n: usize,
    pub k: usize,
    pub gbt: GbtParams,
    pub lin: LinParams,
}

impl Default for SlaHyperParams {
    fn default() -> Self {
        SlaHyperParams {
            line_ngram_n: 2,
            final_ngram_n: 2,
            k: 2,
            gbt: GbtParams::default(),
            lin: LinParams::default(),
        }
    }
}

impl SlaHyperParams {
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [
            ("line_ngram_n", self.line_ngram_n),
            ("final_ngram_n", self.final_ngram_n),
        ] {
            if !(1..=4).contains(&n) {
                return Err(Error::invalid(format!("{name} must be in 1..=4, got {n}")));
            }
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        self.gbt.validate()?;
        self.lin.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineRelevanceExample {
    pub vector: SparseVector,
    pub relevant: bool,
    pub doc_id: String,
    pub line_index: usize,
}

/// One example per report line; positives are the highlighted lines.
pub fn build_line_labels(
    doc: &LabeledDocument,
    attribute: &str,
    vocab: &Vocabulary,
) -> Result<Vec<LineRelevanceExample>> {
    let ann = doc
        .annotation(attribute)
        .ok_or_else(|| Error::MissingAnnotation {
            id: doc.id().to_string(),
            attribute: attribute.to_string(),
        })?;
    Ok(tokenize_lines(&doc.report)
        .into_iter()
        .map(|tl| LineRelevanceExample {
            vector: vocab.vectorize(&tl.tokens),
            relevant: ann.line_indices.contains(&tl.source_line_index),
            doc_id: doc.id().to_string(),
            line_index: tl.source_line_index,
        })
        .collect())
}

/// Indices of the `k` highest scores; ties go to the lower index.
pub fn select_top_k(line_scores: &[f64], k: usize) -> BTreeSet<usize> {
    let mut order: Vec<usize> = (0..line_scores.len()).collect();
    order.sort_by(|&a, &b| line_scores[b].total_cmp(&line_scores[a]).then(a.cmp(&b)));
    order.into_iter().take(k).collect()
}

/// Inclusive run of report lines presented to the classifier as one line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_line: usize,
    pub end_line: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectedLines {
    pub segments: Vec<Segment>,
    pub k: usize,
}

impl SelectedLines {
    pub fn line_indices(&self) -> BTreeSet<usize> {
        self.segments
            .iter()
            .flat_map(|s| s.start_line..=s.end_line)
            .collect()
    }
}

/// Merge runs of consecutive indices; a run's weight is its highest score.
pub fn join_adjacent(indices: &BTreeSet<usize>, line_scores: &[f64]) -> SelectedLines {
    let mut segments: Vec<Segment> = Vec::new();
    for &i in indices {
        let s = line_scores[i];
        match segments.last_mut() {
            Some(last) if last.end_line + 1 == i => {
                last.end_line = i;
                last.weight = last.weight.max(s);
            }
            _ => segments.push(Segment {
                start_line: i,
                end_line: i,
                weight: s,
            }),
        }
    }
    SelectedLines {
        segments,
        k: indices.len(),
    }
}

/// One segment per selected line.
pub fn singleton_segments(indices: &BTreeSet<usize>, line_scores: &[f64]) -> SelectedLines {
    SelectedLines {
        segments: indices
            .iter()
            .map(|&i| Segment {
                start_line: i,
                end_line: i,
                weight: line_scores[i],
            })
            .collect(),
        k: indices.len(),
    }
}

/// Member lines of a segment joined by single spaces.
pub fn segment_text(report: &Report, segment: &Segment) -> String {
    report.lines[segment.start_line..=segment.end_line].join(" ")
}

#[derive(Clone, Debug, PartialEq)]
pub struct DocRepresentation {
    pub vector: SparseVector,
    pub provenance: SelectedLines,
}

/// d_r: the sum over segments of weight times the segment's n-gram vector.
pub fn compose_representation(
    selected: &SelectedLines,
    report: &Report,
    final_vocab: &Vocabulary,
    weighting: bool,
) -> DocRepresentation {
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for seg in &selected.segments {
        let m = if weighting { seg.weight } else { 1.0 };
        let tokens = tokenize(&segment_text(report, seg));
        pairs.extend(final_vocab.feature_set(&tokens).into_iter().map(|i| (i, m)));
    }
    let vector = SparseVector::from_pairs(final_vocab.len(), pairs)
        .expect("feature indices come from the vocabulary");
    DocRepresentation {
        vector,
        provenance: selected.clone(),
    }
}

pub const RULES_VERSION: u32 = 1;
const DEFAULT_RULES: &str = include_str!("../data/keyword_rules.json");

/// Expert keyword phrases per attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordRules {
    pub version: u32,
    pub rules: BTreeMap<String, Vec<String>>,
}

impl Default for KeywordRules {
    fn default() -> Self {
        KeywordRules::from_json(DEFAULT_RULES).expect("embedded keyword rules are valid")
    }
}

impl KeywordRules {
    pub fn from_json(text: &str) -> Result<Self> {
        let rules: KeywordRules = serde_json::from_str(text)?;
        if rules.version != RULES_VERSION {
            return Err(Error::FormatVersion {
                expected: RULES_VERSION,
                found: rules.version,
            });
        }
        Ok(rules)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn phrases(&self, attribute: &str) -> Result<&[String]> {
        match self.rules.get(attribute) {
            Some(p) if !p.is_empty() => Ok(p),
            _ => Err(Error::invalid(format!(
                "no keyword rules for attribute {attribute:?}"
            ))),
        }
    }
}

/// Lines whose normalized tokens contain any phrase as a contiguous run.
pub fn rule_select(lines: &[TokenLine], phrases: &[String]) -> BTreeSet<usize> {
    let patterns: Vec<Vec<String>> = phrases
        .iter()
        .map(|p| tokenize(p))
        .filter(|p| !p.is_empty())
        .collect();
    lines
        .iter()
        .filter(|l| {
            patterns
                .iter()
                .any(|p| l.tokens.windows(p.len()).any(|w| w == p.as_slice()))
        })
        .map(|l| l.source_line_index)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlaModel {
    pub version: u32,
    pub attribute: String,
    pub variant: Variant,
    pub hyper: SlaHyperParams,
    pub line_vocab: Option<Vocabulary>,
    pub line_scorer: Option<GbtModel>,
    pub keyword_rules: Option<Vec<String>>,
    pub final_vocab: Vocabulary,
    pub final_classifier: LinearModel,
}

/// A label, its per-class scores and the lines that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub scores: BTreeMap<String, f64>,
    pub rationale: SelectedLines,
}

fn gold_lines(doc: &LabeledDocument, attribute: &str) -> Result<BTreeSet<usize>> {
    doc.annotation(attribute)
        .map(|a| a.line_indices.clone())
        .ok_or_else(|| Error::MissingAnnotation {
            id: doc.id().to_string(),
            attribute: attribute.to_string(),
        })
}

impl SlaModel {
    /// Relevance probability of every line; `None` for rules and oracle.
    pub fn line_scores(&self, lines: &[TokenLine]) -> Option<Vec<f64>> {
        let (vocab, scorer) = (self.line_vocab.as_ref()?, self.line_scorer.as_ref()?);
        Some(
            lines
                .iter()
                .map(|l| scorer.predict(&vocab.vectorize(&l.tokens)))
                .collect(),
        )
    }

    /// Pick the lines for one report. The oracle needs `gold`.
    pub fn select(
        &self,
        lines: &[TokenLine],
        gold: Option<&BTreeSet<usize>>,
    ) -> Result<SelectedLines> {
        let n = lines.len();
        let (indices, scores) = match self.variant {
            Variant::Oracle => {
                let gold = gold.ok_or_else(|| {
                    Error::invalid("the oracle variant needs gold line indices to predict")
                })?;
                (
                    gold.iter().copied().filter(|&i| i < n).collect(),
                    vec![1.0; n],
                )
            }
            Variant::Rules => {
                let phrases = self.keyword_rules.as_deref().unwrap_or(&[]);
                (rule_select(lines, phrases), vec![1.0; n])
            }
            _ => {
                let scores = self
                    .line_scores(lines)
                    .ok_or_else(|| Error::invalid("model is missing its line scorer"))?;
                (select_top_k(&scores, self.hyper.k), scores)
            }
        };
        let mut selected = if self.variant.joining() {
            join_adjacent(&indices, &scores)
        } else {
            singleton_segments(&indices, &scores)
        };
        selected.k = self.hyper.k;
        Ok(selected)
    }

    fn classify(&self, report: &Report, selected: SelectedLines) -> Prediction {
        let rep = compose_representation(
            &selected,
            report,
            &self.final_vocab,
            self.variant.weighting(),
        );
        let (label, scores) = self.final_classifier.predict(&rep.vector);
        Prediction {
            label,
            scores,
            rationale: rep.provenance,
        }
    }
}

/// Predict from the report text alone. Not available for the oracle.
pub fn predict_sla(model: &SlaModel, report: &Report) -> Result<Prediction> {
    let selected = model.select(&tokenize_lines(report), None)?;
    Ok(model.classify(report, selected))
}

/// Predict a labeled document; the oracle reads its gold highlights.
pub fn predict_document(model: &SlaModel, doc: &LabeledDocument) -> Result<Prediction> {
    let gold = match model.variant {
        Variant::Oracle => Some(gold_lines(doc, &model.attribute)?),
        _ => None,
    };
    let selected = model.select(&tokenize_lines(&doc.report), gold.as_ref())?;
    Ok(model.classify(&doc.report, selected))
}

/// Gold composed labels of `docs`, failing on the first unannotated one.
pub fn gold_labels(
    docs: &[&LabeledDocument],
    attribute: &str,
    schemas: &SchemaSet,
) -> Result<Vec<GoldLabel>> {
    docs.iter()
        .map(|d| {
            schemas
                .gold(d, attribute)
                .ok_or_else(|| Error::MissingAnnotation {
                    id: d.id().to_string(),
                    attribute: attribute.to_string(),
                })
        })
        .collect()
}

pub fn train_sla(
    docs: &[&LabeledDocument],
    attribute: &str,
    schemas: &SchemaSet,
    hyper: &SlaHyperParams,
    variant: Variant,
    rules: Option<&KeywordRules>,
) -> Result<SlaModel> {
    hyper.validate()?;
    if docs.is_empty() {
        return Err(Error::invalid("SLA training needs at least one document"));
    }
    let golds = gold_labels(docs, attribute, schemas)?;
    let classes = class_order(&golds);
    let labels: Vec<String> = golds.into_iter().map(|g| g.label).collect();
    let token_lines: Vec<Vec<TokenLine>> = docs.iter().map(|d| tokenize_lines(&d.report)).collect();

    let mut model = SlaModel {
        version: MODEL_VERSION,
        attribute: attribute.to_string(),
        variant,
        hyper: hyper.clone(),
        line_vocab: None,
        line_scorer: None,
        keyword_rules: None,
        // Placeholders until the final stage is fit below.
        final_vocab: Vocabulary::build([&[][..]], 1, DEFAULT_MIN_COUNT)?,
        final_classifier: LinearModel {
            classes: Vec::new(),
            dim: 0,
            weights: Vec::new(),
            intercepts: Vec::new(),
            params: hyper.lin.clone(),
        },
    };

    match variant {
        Variant::Rules => {
            let owned;
            let rules = match rules {
                Some(r) => r,
                None => {
                    owned = KeywordRules::default();
                    &owned
                }
            };
            model.keyword_rules = Some(rules.phrases(attribute)?.to_vec());
        }
        Variant::Oracle => {}
        _ => {
            let vocab = Vocabulary::build(
                token_lines.iter().flatten().map(|l| l.tokens.as_slice()),
                hyper.line_ngram_n,
                DEFAULT_MIN_COUNT,
            )?;
            let mut x = Vec::new();
            let mut y = Vec::new();
            for (doc, lines) in docs.iter().zip(&token_lines) {
                let relevant = gold_lines(doc, attribute)?;
                for l in lines {
                    x.push(vocab.vectorize(&l.tokens));
                    y.push(relevant.contains(&l.source_line_index));
                }
            }
            model.line_scorer = Some(train_gbt(&x, &y, &hyper.gbt)?);
            model.line_vocab = Some(vocab);
        }
    }

    let mut selections = Vec::with_capacity(docs.len());
    for (doc, lines) in docs.iter().zip(&token_lines) {
        let gold = match variant {
            Variant::Oracle => Some(gold_lines(doc, attribute)?),
            _ => None,
        };
        selections.push(model.select(lines, gold.as_ref())?);
    }

    // Unigram counts come from every training line; n-grams also come from
    // the joined training segments so cross-line grams have an index.
    let joined: Vec<Vec<String>> = docs
        .iter()
        .zip(&selections)
        .flat_map(|(d, sel)| {
            sel.segments
                .iter()
                .filter(|s| s.end_line > s.start_line)
                .map(|s| tokenize(&segment_text(&d.report, s)))
        })
        .collect();
    let all_lines = || token_lines.iter().flatten().map(|l| l.tokens.as_slice());
    model.final_vocab = Vocabulary::build_with_extra(
        all_lines(),
        all_lines().chain(joined.iter().map(Vec::as_slice)),
        hyper.final_ngram_n,
        DEFAULT_MIN_COUNT,
    )?;

    let reps: Vec<SparseVector> = docs
        .iter()
        .zip(&selections)
        .map(|(d, sel)| {
            compose_representation(sel, &d.report, &model.final_vocab, variant.weighting()).vector
        })
        .collect();
    model.final_classifier = train_l1_logreg(&reps, &labels, &classes, &hyper.lin)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Cancer, EnrichedAnnotation, Scheme};

    fn doc(id: &str, lines: &[&str], attr: &str, value: &str, hl: &[usize]) -> LabeledDocument {
        let mut annotations = BTreeMap::new();
        annotations.insert(
            attr.to_string(),
            EnrichedAnnotation {
                attribute: attr.to_string(),
                values: vec![value.to_string()],
                line_indices: hl.iter().copied().collect(),
                scheme: Scheme::Minimal,
            },
        );
        LabeledDocument {
            report: Report {
                id: id.into(),
                cancer: Cancer::Colon,
                lines: lines.iter().map(|s| s.to_string()).collect(),
            },
            annotations,
        }
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn line_labels_follow_highlights() {
        let lines = ["a", "b", "c", "d", "e"];
        let d = doc("x", &lines, "grade", "grade 1", &[2]);
        let vocab = Vocabulary::build([&["a".to_string()][..]], 1, 1).unwrap();
        let ex = build_line_labels(&d, "grade", &vocab).unwrap();
        let flags: Vec<bool> = ex.iter().map(|e| e.relevant).collect();
        assert_eq!(flags, [false, false, true, false, false]);
        assert!(ex
            .iter()
            .enumerate()
            .all(|(i, e)| e.line_index == i && e.doc_id == "x"));

        let d = doc("x", &lines, "grade", "grade 1", &[1, 3]);
        let flags: Vec<bool> = build_line_labels(&d, "grade", &vocab)
            .unwrap()
            .iter()
            .map(|e| e.relevant)
            .collect();
        assert_eq!(flags, [false, true, false, true, false]);

        let d = doc("x", &lines, "grade", "not reported", &[]);
        assert!(build_line_labels(&d, "grade", &vocab)
            .unwrap()
            .iter()
            .all(|e| !e.relevant));
        assert!(matches!(
            build_line_labels(&d, "laterality", &vocab),
            Err(Error::MissingAnnotation { .. })
        ));
    }

    #[test]
    fn top_k_selection() {
        assert_eq!(select_top_k(&[0.1, 0.9, 0.5], 2), set(&[1, 2]));
        assert_eq!(select_top_k(&[0.5, 0.5], 1), set(&[0]));
        assert_eq!(select_top_k(&[0.1, 0.2, 0.3], 5), set(&[0, 1, 2]));
        let s = [0.3, 0.1, 0.7, 0.7, 0.2];
        let scaled: Vec<f64> = s.iter().map(|v| v * 3.5).collect();
        assert_eq!(select_top_k(&s, 3), select_top_k(&scaled, 3));
    }

    #[test]
    fn joining_rules() {
        let mut scores = vec![0.0; 6];
        scores[1] = 0.9;
        scores[2] = 0.4;
        scores[5] = 0.7;
        let j = join_adjacent(&set(&[1, 2, 5]), &scores);
        assert_eq!(
            j.segments,
            vec![
                Segment {
                    start_line: 1,
                    end_line: 2,
                    weight: 0.9
                },
                Segment {
                    start_line: 5,
                    end_line: 5,
                    weight: 0.7
                },
            ]
        );
        assert_eq!(
            join_adjacent(&set(&[3]), &[0.0, 0.0, 0.0, 0.6])
                .segments
                .len(),
            1
        );
        let j = join_adjacent(&set(&[0, 1, 2]), &[0.2, 0.8, 0.5]);
        assert_eq!(
            j.segments,
            vec![Segment {
                start_line: 0,
                end_line: 2,
                weight: 0.8
            }]
        );
        assert_eq!(j.line_indices(), set(&[0, 1, 2]));
    }

    fn vocab_of(text: &[&str], n: usize) -> Vocabulary {
        let toks: Vec<Vec<String>> = text.iter().map(|t| tokenize(t)).collect();
        Vocabulary::build(toks.iter().map(Vec::as_slice), n, 1).unwrap()
    }

    #[test]
    fn representation_is_weighted_sum() {
        let report = Report {
            id: "r".into(),
            cancer: Cancer::Colon,
            lines: vec!["grade 2".into(), "x".into(), "grade 3".into()],
        };
        let vocab = vocab_of(&["grade 2", "grade 3"], 2);
        let one = SelectedLines {
            segments: vec![Segment {
                start_line: 0,
                end_line: 0,
                weight: 0.8,
            }],
            k: 1,
        };
        let rep = compose_representation(&one, &report, &vocab, true);
        assert_eq!(rep.vector.nnz(), 3);
        assert!(rep.vector.values().iter().all(|&v| v == 0.8));

        let two = SelectedLines {
            segments: vec![
                Segment {
                    start_line: 0,
                    end_line: 0,
                    weight: 0.8,
                },
                Segment {
                    start_line: 2,
                    end_line: 2,
                    weight: 0.5,
                },
            ],
            k: 2,
        };
        let rep = compose_representation(&two, &report, &vocab, true);
        let g = vocab.index_of("grade").unwrap();
        assert!((rep.vector.get(g) - 1.3).abs() < 1e-12);
        let flat = compose_representation(&two, &report, &vocab, false);
        assert_eq!(flat.vector.get(g), 2.0);
        assert_eq!(flat.vector.get(vocab.index_of("grade 2").unwrap()), 1.0);
    }

    #[test]
    fn joined_segments_form_cross_line_ngrams() {
        let report = Report {
            id: "r".into(),
            cancer: Cancer::Colon,
            lines: vec!["histologic grade:".into(), "g2".into()],
        };
        let vocab = vocab_of(&["histologic grade : g2"], 2);
        let joined = join_adjacent(&set(&[0, 1]), &[0.4, 0.6]);
        let rep = compose_representation(&joined, &report, &vocab, true);
        assert!((rep.vector.get(vocab.index_of(": g2").unwrap()) - 0.6).abs() < 1e-12);
        let apart = singleton_segments(&set(&[0, 1]), &[0.4, 0.6]);
        let rep = compose_representation(&apart, &report, &vocab, true);
        assert_eq!(rep.vector.get(vocab.index_of(": g2").unwrap()), 0.0);
    }

    #[test]
    fn rules_match_token_subsequences() {
        let report = Report {
            id: "r".into(),
            cancer: Cancer::Colon,
            lines: vec![
                "a".into(),
                "b".into(),
                "Lymphovascular invasion: absent".into(),
                "c".into(),
                "Histologic Grade: G2".into(),
                "d".into(),
                "histologic grade was discussed".into(),
            ],
        };
        let lines = tokenize_lines(&report);
        let p = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(rule_select(&lines, &p(&["histologic grade"])), set(&[4, 6]));
        assert_eq!(
            rule_select(&lines, &p(&["LYMPHOVASCULAR invasion"])),
            set(&[2])
        );
        assert!(rule_select(&lines, &p(&["perineural invasion"])).is_empty());
        assert!(rule_select(&lines, &p(&["grade histologic"])).is_empty());
    }

    #[test]
    fn default_rules_cover_every_attribute() {
        let rules = KeywordRules::default();
        let schemas = SchemaSet::default();
        for cancer in Cancer::ALL {
            for attr in schemas.attributes(cancer) {
                assert!(rules.phrases(attr).is_ok(), "{attr}");
            }
        }
        assert!(matches!(
            KeywordRules::from_json(r#"{"version": 9, "rules": {}}"#),
            Err(Error::FormatVersion { .. })
        ));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert_eq!(
            "no_weight_no_join".parse::<Variant>().unwrap(),
            Variant::NoWeightNoJoin
        );
        assert!("attention".parse::<Variant>().is_err());
    }
}
