use std::collections::BTreeMap;

use sla::corpus::{select, split_corpus, Cancer, LabeledDocument, SchemaSet};
use sla::pipeline::{self, Method, TrainedModel};
use sla::sla::{
    compose_representation, join_adjacent, predict_document, select_top_k, singleton_segments, SlaModel, Variant,
};
use sla::synth::{generate_corpus, GenConfig};
use sla::textproc::{tokenize, tokenize_lines, SparseVector};

struct Fixture {
    docs: Vec<LabeledDocument>,
    train: Vec<String>,
    test: Vec<String>,
}

fn fixture() -> Fixture {
    let docs = generate_corpus(&GenConfig::for_cancer(Cancer::Colon, 120, 21)).unwrap();
    let split = split_corpus(&docs, 80, 3).unwrap();
    Fixture {
        docs,
        train: split.train_ids,
        test: split.test_ids,
    }
}

fn sla_model(f: &Fixture, variant: Variant, attribute: &str) -> SlaModel {
    let schemas = SchemaSet::default();
    let method = Method::Sla(variant);
    let train = select(&f.docs, &f.train);
    let bundle = pipeline::train(method, &train, attribute, &schemas, &method.default_config(), 5, None).unwrap();
    match bundle.model {
        TrainedModel::Sla(m) => m,
        _ => unreachable!("SLA method yields an SLA model"),
    }
}

/// Dense d_r rebuilt from the rationale alone.
fn rebuild(model: &SlaModel, doc: &LabeledDocument, segments: &[sla::sla::Segment]) -> Vec<f64> {
    let mut v = vec![0.0; model.final_vocab.len()];
    for s in segments {
        let text = doc.report.lines[s.start_line..=s.end_line].join(" ");
        let m = if model.variant.weighting() { s.weight } else { 1.0 };
        for i in model.final_vocab.feature_set(&tokenize(&text)) {
            v[i] += m;
        }
    }
    v
}

#[test]
fn rationale_reproduces_prediction() {
    let f = fixture();
    let model = sla_model(&f, Variant::Sla, "grade");
    for doc in select(&f.docs, &f.test) {
        let p = predict_document(&model, doc).unwrap();
        let dense = rebuild(&model, doc, &p.rationale.segments);
        let x = SparseVector::from_pairs(dense.len(), dense.iter().copied().enumerate().filter(|(_, v)| *v != 0.0))
            .unwrap();
        let (label, scores) = model.final_classifier.predict(&x);
        assert_eq!(label, p.label);
        assert_eq!(scores, p.scores);
        assert_eq!(p.rationale.line_indices().len(), model.hyper.k.min(doc.report.lines.len()));
    }
}

#[test]
fn oracle_and_rules_use_unit_weights() {
    let f = fixture();
    let oracle = sla_model(&f, Variant::Oracle, "perineural_invasion");
    let rules = sla_model(&f, Variant::Rules, "perineural_invasion");
    for doc in select(&f.docs, &f.test) {
        let p = predict_document(&oracle, doc).unwrap();
        assert_eq!(p.rationale.line_indices(), doc.annotations["perineural_invasion"].line_indices);
        assert!(p.rationale.segments.iter().all(|s| s.weight == 1.0));
        let r = predict_document(&rules, doc).unwrap();
        assert!(r.rationale.segments.iter().all(|s| s.weight == 1.0));
    }
    assert!(sla::sla::predict_sla(&oracle, &f.docs[0].report).is_err());
}

#[test]
fn top_scored_line_is_usually_planted() {
    let f = fixture();
    let mut hits = BTreeMap::new();
    for attr in ["grade", "lymphovascular_invasion", "perineural_invasion"] {
        let model = sla_model(&f, Variant::Sla, attr);
        let (mut hit, mut total) = (0, 0);
        for doc in select(&f.docs, &f.test) {
            let ann = &doc.annotations[attr];
            if ann.is_not_reported() {
                continue;
            }
            let scores = model.line_scores(&tokenize_lines(&doc.report)).unwrap();
            let top = *select_top_k(&scores, 1).iter().next().unwrap();
            total += 1;
            hit += usize::from(ann.line_indices.contains(&top));
        }
        hits.insert(attr, hit as f64 / total as f64);
    }
    for (attr, rate) in hits {
        assert!(rate >= 0.9, "{attr}: top-1 line planted in {rate:.2} of reports");
    }
}

#[test]
fn selection_and_representation_scale_with_scores() {
    let f = fixture();
    let model = sla_model(&f, Variant::Sla, "grade");
    let doc = &f.docs[0];
    let scores = model.line_scores(&tokenize_lines(&doc.report)).unwrap();
    let c = 3.5;
    let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
    for k in 1..6 {
        let idx = select_top_k(&scores, k);
        assert_eq!(idx, select_top_k(&scaled, k));
        let a = compose_representation(&join_adjacent(&idx, &scores), &doc.report, &model.final_vocab, true);
        let b = compose_representation(&join_adjacent(&idx, &scaled), &doc.report, &model.final_vocab, true);
        assert_eq!(a.vector.indices(), b.vector.indices());
        for (x, y) in a.vector.values().iter().zip(b.vector.values()) {
            assert!((x * c - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}

#[test]
fn all_lines_unweighted_matches_per_line_sum() {
    let f = fixture();
    let model = sla_model(&f, Variant::NoWeightNoJoin, "grade");
    for doc in f.docs.iter().take(10) {
        let lines = tokenize_lines(&doc.report);
        let n = lines.len();
        let scores = vec![0.5; n];
        let idx = select_top_k(&scores, n + 3);
        let rep = compose_representation(&singleton_segments(&idx, &scores), &doc.report, &model.final_vocab, false);
        let mut want = vec![0.0; model.final_vocab.len()];
        for l in &lines {
            for (i, v) in model.final_vocab.vectorize(&l.tokens).iter() {
                want[i] += v;
            }
        }
        assert_eq!(rep.vector.to_dense(), want);
    }
}

#[test]
fn joined_segments_partition_selection() {
    let scores = [0.1, 0.9, 0.8, 0.2, 0.7, 0.3, 0.95];
    for k in 1..=scores.len() {
        let idx = select_top_k(&scores, k);
        let joined = join_adjacent(&idx, &scores);
        assert_eq!(joined.line_indices(), idx);
        let covered: usize = joined.segments.iter().map(|s| s.end_line - s.start_line + 1).sum();
        assert_eq!(covered, idx.len());
        for w in joined.segments.windows(2) {
            assert!(w[0].end_line + 1 < w[1].start_line);
        }
        for s in &joined.segments {
            let best = (s.start_line..=s.end_line).map(|i| scores[i]).fold(f64::MIN, f64::max);
            assert_eq!(s.weight, best);
        }
    }
}
