use sla::corpus::{format_corpus, load_corpus, parse_corpus, save_corpus, split_corpus, Cancer, SchemaSet};
use sla::eval::curve::{learning_curve, CurveConfig};
use sla::pipeline::Method;
use sla::stage::{extract_stage_tokens, stage_report};
use sla::synth::{generate_corpus, generate_with_layout, GenConfig};

#[test]
fn corpus_round_trips_through_disk() {
    let docs = generate_corpus(&GenConfig::for_cancer(Cancer::Kidney, 25, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    save_corpus(&path, &docs).unwrap();
    assert_eq!(load_corpus(&path).unwrap(), docs);
    assert_eq!(parse_corpus(&format_corpus(&docs)).unwrap(), docs);
}

#[test]
fn splits_are_disjoint_and_seeded() {
    let docs = generate_corpus(&GenConfig::for_cancer(Cancer::Colon, 50, 1)).unwrap();
    let a = split_corpus(&docs, 20, 9).unwrap();
    assert_eq!(a, split_corpus(&docs, 20, 9).unwrap());
    assert_eq!(a.train_ids.len() + a.test_ids.len(), 50);
    assert!(a.train_ids.iter().all(|id| !a.test_ids.contains(id)));
    assert_ne!(a.train_ids, split_corpus(&docs, 20, 10).unwrap().train_ids);
    assert!(split_corpus(&docs, 50, 1).is_err());
}

#[test]
fn planted_stage_tokens_are_recovered() {
    let mut cfg = GenConfig::for_cancer(Cancer::Colon, 40, 4);
    cfg.stage_probability = 1.0;
    for g in generate_with_layout(&cfg).unwrap() {
        let line = &g.doc.report.lines[g.stage_line.unwrap()];
        let tokens = extract_stage_tokens(line);
        assert_eq!(tokens.len(), 1, "{line}");
        let (tok, stage) = stage_report(&g.doc.report).unwrap();
        assert_eq!(tok.token, tokens[0].token);
        assert_eq!(stage.compose(), tok.token);
    }
}

fn small_curve(seed: u64) -> CurveConfig {
    let mut cfg = CurveConfig::new(Method::DocLogreg, vec!["grade".into(), "laterality".into()], seed);
    cfg.sizes = vec![12, 24];
    cfg.runs = 3;
    cfg.trials = 2;
    cfg.folds = 2;
    cfg.bootstrap.iterations = 100;
    cfg
}

#[test]
fn curve_has_one_cell_per_size_and_run() {
    let docs = generate_corpus(&GenConfig::for_cancer(Cancer::Kidney, 60, 3)).unwrap();
    let schemas = SchemaSet::default();
    let cfg = small_curve(1);
    let curve = learning_curve(&docs, &schemas, None, &cfg).unwrap();
    assert_eq!(curve.cells.len(), 6);
    assert_eq!(curve.points.len(), 2);
    for p in &curve.points {
        assert_eq!(p.runs, 3);
        assert!(p.micro_f1_ci.lo <= p.mean_micro_f1 && p.mean_micro_f1 <= p.micro_f1_ci.hi);
    }
    for c in &curve.cells {
        assert_eq!(c.test_ids.len(), 60 - c.size);
    }
    // Runs reshuffle; sizes share each run's shuffle.
    let run_seeds: Vec<u64> = curve.cells.iter().filter(|c| c.size == 12).map(|c| c.split_seed).collect();
    assert_eq!(run_seeds.len(), 3);
    assert!(run_seeds[0] != run_seeds[1] && run_seeds[1] != run_seeds[2]);
    let again = learning_curve(&docs, &schemas, None, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&curve).unwrap(), serde_json::to_string(&again).unwrap());
    assert_eq!(curve.to_tsv(), again.to_tsv());
}
