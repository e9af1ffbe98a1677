mod common;

use std::fs;
use std::path::Path;

use judgematch::assignment::validate;
use judgematch_service::pipeline::{Manifest, MANIFEST, TIMING_LOG};
use judgematch_service::{Pipeline, RunConfig, ServiceError, Stage};

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .filter(|(n, _)| n != TIMING_LOG)
        .collect();
    out.sort();
    out
}

#[test]
fn full_run_writes_valid_stamped_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(&tmp.path().join("in"), &common::Spec::small(), common::FULL_LEARNERS);
    let cfg = RunConfig::load(&fx.config).unwrap();
    let hash = cfg.hash();
    let out = tmp.path().join("out");
    let summary = Pipeline::new(cfg, &out).run(Stage::Evaluate).unwrap();

    let a = summary.assigned.unwrap();
    assert!(validate(&a.assignment, &a.grid, &a.constraints).is_empty());
    assert_eq!(a.assignment.pairs.len(), 10 * 3);
    assert!(summary.evaluation.is_some());

    let manifest: Manifest = serde_json::from_slice(&fs::read(out.join(MANIFEST)).unwrap()).unwrap();
    assert_eq!(manifest.config_hash, hash);
    for name in [
        "assignment.csv",
        "assignment_open.csv",
        "assignment_social_impact.csv",
        "assignment_report.json",
        "model.json",
        "features.csv",
        "evaluation.json",
        "provenance.json",
    ] {
        assert!(manifest.artifacts.contains_key(name), "{name} missing from manifest");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("assignment_report.json")).unwrap()).unwrap();
    assert_eq!(report["config_hash"], hash);
    assert_eq!(report["data"]["violations"].as_array().unwrap().len(), 0);

    let csv = fs::read_to_string(out.join("assignment.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "judge_id,venture_id,similarity,track");
    for line in lines {
        let sim = line.split(',').nth(2).unwrap();
        assert_eq!(sim.split('.').nth(1).unwrap().len(), 6, "{line}");
    }
}

#[test]
fn rerun_hits_every_stage_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(&tmp.path().join("in"), &common::Spec::small(), common::LEXICAL_LEARNERS);
    let out = tmp.path().join("out");
    let first = Pipeline::new(RunConfig::load(&fx.config).unwrap(), &out).run(Stage::Evaluate).unwrap();
    assert!(first.timings.iter().all(|t| !t.cache_hit));
    let before = artifacts(&out);
    let second = Pipeline::new(RunConfig::load(&fx.config).unwrap(), &out).run(Stage::Evaluate).unwrap();
    assert_eq!(second.timings.len(), 5);
    assert!(second.timings.iter().all(|t| t.cache_hit), "{:?}", second.timings);
    let after = artifacts(&out);
    assert_eq!(before.len(), after.len());
    for ((name, x), (_, y)) in before.iter().zip(&after) {
        assert!(x == y, "{name} changed on a cached rerun");
    }
}

#[test]
fn changed_input_invalidates_downstream_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(&tmp.path().join("in"), &common::Spec::small(), common::LEXICAL_LEARNERS);
    let out = tmp.path().join("out");
    Pipeline::new(RunConfig::load(&fx.config).unwrap(), &out).run(Stage::Assign).unwrap();
    let labels = fx.dir.join("labels.csv");
    let text = fs::read_to_string(&labels).unwrap();
    let (head, rest) = text.split_once('\n').unwrap();
    let (first, tail) = rest.split_once('\n').unwrap();
    let (pair, q) = first.rsplit_once(',').unwrap();
    let flipped = if q == "5" { "1" } else { "5" };
    let text = format!("{head}\n{pair},{flipped}\n{tail}");
    fs::write(&labels, text).unwrap();
    let again = Pipeline::new(RunConfig::load(&fx.config).unwrap(), &out).run(Stage::Assign).unwrap();
    assert!(again.timings.iter().all(|t| !t.cache_hit), "{:?}", again.timings);
}

#[test]
fn separate_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(&tmp.path().join("in"), &common::Spec::small(), common::FULL_LEARNERS);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    Pipeline::new(RunConfig::load(&fx.config).unwrap(), &a).run(Stage::Evaluate).unwrap();
    Pipeline::new(RunConfig::load(&fx.config).unwrap(), &b).run(Stage::Evaluate).unwrap();
    let (x, y) = (artifacts(&a), artifacts(&b));
    assert!(!x.is_empty());
    assert_eq!(x.iter().map(|(n, _)| n).collect::<Vec<_>>(), y.iter().map(|(n, _)| n).collect::<Vec<_>>());
    for ((name, bx), (_, by)) in x.iter().zip(&y) {
        assert!(bx == by, "{name} differs between runs");
    }
}

#[test]
fn missing_embeddings_fail_at_similarity_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(&tmp.path().join("in"), &common::Spec::small(), common::FULL_LEARNERS);
    let path = fx.dir.join("embeddings.jsonl");
    let mut cfg = RunConfig::load(&fx.config).unwrap();
    fs::remove_file(&path).unwrap();
    cfg.paths.embeddings = Some(path.clone());
    let out = tmp.path().join("out");
    let err = Pipeline::new(cfg, &out).run(Stage::Assign).unwrap_err();
    match &err {
        ServiceError::Stage { stage, source } => {
            assert_eq!(*stage, "similarity");
            assert!(matches!(**source, ServiceError::MissingPath(ref p) if p == &path), "{source}");
        }
        other => panic!("unexpected error {other}"),
    }
    assert!(err.to_string().contains("embeddings.jsonl"));
    assert!(out.join("provenance.json").exists(), "ingest artifacts retained");
}

#[test]
fn single_learner_runs_without_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let learners = "[[learners]]\nkind = \"embedding\"\nid = \"embed_token\"\npooling = \"token\"\n";
    let fx = common::write(&tmp.path().join("in"), &common::Spec::small(), learners);
    let mut cfg = RunConfig::load(&fx.config).unwrap();
    cfg.paths.labels = None;
    let out = tmp.path().join("out");
    let summary = Pipeline::new(cfg, &out).run(Stage::Assign).unwrap();
    let a = summary.assigned.unwrap();
    assert!(validate(&a.assignment, &a.grid, &a.constraints).is_empty());
    assert!(!out.join("training_report.json").exists());
}

#[test]
fn seed_override_changes_the_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(&tmp.path().join("in"), &common::Spec::small(), common::LEXICAL_LEARNERS);
    let base = RunConfig::load(&fx.config).unwrap();
    let mut seeded = base.clone();
    seeded.apply_seed_override(99);
    assert_ne!(base.hash(), seeded.hash());
    assert_eq!(base.hash(), RunConfig::load(&fx.config).unwrap().hash());
}
