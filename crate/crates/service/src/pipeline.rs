//! Staged pipeline: ingest → similarity → train → assign → evaluate.
//!
//! Each stage's output is cached under a key derived from the engine
//! version, the config sections it reads, the upstream key and the bytes of
//! its input files. Artifacts are written to the output directory stamped
//! with the config hash, and listed with their digests in `manifest.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use judgematch::assignment::{
    assign_maxmin, build_grid, validate, Assignment, ConstraintSet, JudgeInfo, SimilarityGrid, VentureInfo,
};
use judgematch::corpus::{
    check_tracks, compose_judge, compose_venture, dropped_columns, ingest_judges, ingest_ventures, read_labels,
    read_supplements, Document, JudgeProfile, ProvenanceReport, Table, VentureApplication,
};
use judgematch::embedding::{load_embeddings, EmbeddingSet};
use judgematch::ensemble::{
    cross_validate_prune, EnsembleModel, FeatureMatrix, LearnerScale, PairKey, RetainedLearner, TrainingReport,
    LABEL_MAX, LABEL_MIN,
};
use judgematch::evaluation::{permutation_test, CohortScores, TestResult};
use judgematch::lexical::BackgroundCorpus;
use judgematch::llm::{ChatClient, RetryPolicy, ScoreCache};
use judgematch::ENGINE_VERSION;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{hex_digest, LearnerSpec, RunConfig};
use crate::error::{ServiceError, ServiceResult};
use crate::export;
use crate::learners::{compute_scores, LearnerInputs, LearnerScores, LlmRuntime, SimilarityReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Similarity,
    Train,
    Assign,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Similarity => "similarity",
            Stage::Train => "train",
            Stage::Assign => "assign",
            Stage::Evaluate => "evaluate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub judges: Vec<JudgeProfile>,
    pub ventures: Vec<VentureApplication>,
    pub judge_docs: Vec<Document>,
    pub venture_docs: Vec<Document>,
    pub coi_pairs: BTreeSet<(String, String)>,
    /// (judge_id, venture_id, quality)
    pub labels: Vec<(String, String, u8)>,
    pub provenance: ProvenanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Similarities {
    pub scores: LearnerScores,
    pub report: SimilarityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trained {
    pub model: EnsembleModel,
    pub report: Option<TrainingReport>,
    pub features_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assigned {
    pub grid: SimilarityGrid,
    pub constraints: ConstraintSet,
    pub assignment: Assignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub wall_ms: f64,
    pub cache_hit: bool,
}

/// Artifact envelope carrying provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub engine_version: String,
    pub config_hash: String,
    pub data: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub engine_version: String,
    pub config_hash: String,
    /// File name → SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
}

pub const MANIFEST: &str = "manifest.json";
pub const TIMING_LOG: &str = "timing.json";
pub const GRID_FILE: &str = "grid.json";
pub const ASSIGNMENT_FILE: &str = "assignment.json";
pub const REPORT_FILE: &str = "assignment_report.json";
pub const EVALUATION_FILE: &str = "evaluation.json";

pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
    cache: PathBuf,
    config_hash: String,
    chat: Option<Arc<dyn ChatClient>>,
    timings: Vec<StageTiming>,
    written: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub timings: Vec<StageTiming>,
    pub assigned: Option<Assigned>,
    pub evaluation: Option<TestResult>,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, out_dir: &Path) -> Self {
        let config_hash = cfg.hash();
        Pipeline {
            cfg,
            out: out_dir.to_path_buf(),
            cache: out_dir.join(".cache"),
            config_hash,
            chat: None,
            timings: Vec::new(),
            written: BTreeMap::new(),
        }
    }

    pub fn with_cache_dir(mut self, dir: &Path) -> Self {
        self.cache = dir.to_path_buf();
        self
    }

    pub fn with_chat_client(mut self, client: Arc<dyn ChatClient>) -> Self {
        self.chat = Some(client);
        self
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// Run every stage up to and including `until`.
    pub fn run(mut self, until: Stage) -> ServiceResult<RunSummary> {
        self.cfg.validate()?;
        fs::create_dir_all(&self.out)?;
        fs::create_dir_all(&self.cache)?;

        let (ingest_key, ingested) = self.stage(Stage::Ingest, &self.ingest_key().map_err(|e| e.in_stage("ingest"))?, |p| p.ingest())?;
        self.write_json("provenance.json", &ingested.provenance)?;
        self.write_json("documents.json", &(&ingested.judge_docs, &ingested.venture_docs))?;
        let mut summary = RunSummary {
            out_dir: self.out.clone(),
            config_hash: self.config_hash.clone(),
            timings: Vec::new(),
            assigned: None,
            evaluation: None,
        };
        if until >= Stage::Similarity {
            let key = self.similarity_key(&ingest_key).map_err(|e| e.in_stage("similarity"))?;
            let (sim_key, sims) = self.stage(Stage::Similarity, &key, |p| p.similarity(&ingested))?;
            self.write_json("learner_scores.json", &sims.scores)?;
            self.write_json("similarity_report.json", &sims.report)?;
            if until >= Stage::Train {
                let key = self.key_of(Stage::Train, &[&sim_key, &json(&self.cfg.ensemble)], &[])?;
                let (train_key, trained) = self.stage(Stage::Train, &key, |p| p.train(&ingested, &sims.scores))?;
                self.write_json("model.json", &trained.model)?;
                if let Some(r) = &trained.report {
                    self.write_json("training_report.json", r)?;
                }
                self.write_bytes("features.csv", trained.features_csv.as_bytes())?;
                if until >= Stage::Assign {
                    let key = self.key_of(
                        Stage::Assign,
                        &[&train_key, &ingest_key, &json(&self.cfg.constraints), &json(&self.cfg.tracks)],
                        &[],
                    )?;
                    let (_, assigned) =
                        self.stage(Stage::Assign, &key, |p| p.assign(&ingested, &sims.scores, &trained.model))?;
                    self.write_assignment(&assigned)?;
                    summary.assigned = Some(assigned);
                }
            }
        }
        if until >= Stage::Evaluate {
            if let Some(path) = self.cfg.paths.cohort_scores.clone() {
                let key = self
            .key_of(Stage::Evaluate, &[&json(&self.cfg.evaluation)], &[&path])
            .map_err(|e| e.in_stage("evaluate"))?;
                let (_, result) = self.stage(Stage::Evaluate, &key, |p| p.evaluate(&path))?;
                self.write_json(EVALUATION_FILE, &export::round_report(&result))?;
                summary.evaluation = Some(result);
            } else {
                log::info!("no cohort_scores configured; skipping evaluation");
            }
        }
        self.finish()?;
        summary.timings = self.timings.clone();
        Ok(summary)
    }

    /// Only the evaluation stage; needs `paths.cohort_scores`.
    pub fn evaluate_only(mut self) -> ServiceResult<TestResult> {
        let path = self
            .cfg
            .paths
            .cohort_scores
            .clone()
            .ok_or_else(|| ServiceError::Config("paths.cohort_scores is not set".into()))?;
        fs::create_dir_all(&self.out)?;
        fs::create_dir_all(&self.cache)?;
        let key = self
            .key_of(Stage::Evaluate, &[&json(&self.cfg.evaluation)], &[&path])
            .map_err(|e| e.in_stage("evaluate"))?;
        let (_, result) = self.stage(Stage::Evaluate, &key, |p| p.evaluate(&path))?;
        self.write_json(EVALUATION_FILE, &export::round_report(&result))?;
        self.finish()?;
        Ok(result)
    }

    fn stage<T: Serialize + DeserializeOwned>(
        &mut self,
        stage: Stage,
        key: &str,
        compute: impl FnOnce(&mut Self) -> ServiceResult<T>,
    ) -> ServiceResult<(String, T)> {
        let started = Instant::now();
        let path = self.cache.join(format!("{}-{key}.json", stage.name()));
        let cached = fs::read(&path).ok().and_then(|b| serde_json::from_slice::<T>(&b).ok());
        let (value, hit) = match cached {
            Some(v) => (v, true),
            None => {
                let v = compute(self).map_err(|e| e.in_stage(stage.name()))?;
                fs::write(&path, serde_json::to_vec(&v)?)?;
                (v, false)
            }
        };
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        log::info!("stage {} {} in {wall_ms:.1} ms", stage.name(), if hit { "cached" } else { "computed" });
        self.timings.push(StageTiming { stage: stage.name().to_string(), wall_ms, cache_hit: hit });
        Ok((key.to_string(), value))
    }

    fn key_of(&self, stage: Stage, parts: &[&str], files: &[&Path]) -> ServiceResult<String> {
        let mut buf = format!("{}\u{1f}{}\u{1f}", stage.name(), ENGINE_VERSION);
        for p in parts {
            buf.push_str(p);
            buf.push('\u{1f}');
        }
        for f in files {
            buf.push_str(&file_digest(f)?);
            buf.push('\u{1f}');
        }
        Ok(hex_digest(buf.as_bytes()))
    }

    fn ingest_key(&self) -> ServiceResult<String> {
        let p = &self.cfg.paths;
        let mut files: Vec<&Path> = vec![&p.judges, &p.ventures];
        files.extend([&p.supplements, &p.coi, &p.labels].into_iter().flatten().map(PathBuf::as_path));
        let parts = [
            json(&self.cfg.judge_schema),
            json(&self.cfg.venture_schema),
            json(&self.cfg.tracks),
            json(&(p.supplements.is_some(), p.coi.is_some(), p.labels.is_some())),
        ];
        let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
        self.key_of(Stage::Ingest, &refs, &files)
    }

    fn similarity_key(&self, ingest_key: &str) -> ServiceResult<String> {
        let p = &self.cfg.paths;
        let mut files: Vec<&Path> = Vec::new();
        let roster = &self.cfg.learners;
        if roster.iter().any(LearnerSpec::needs_embeddings) {
            if let Some(e) = &p.embeddings {
                files.push(e);
            }
        }
        let text_background = roster.iter().any(|l| matches!(l, LearnerSpec::Tfidf { background: true, .. }));
        let mut bg_dir_digest = String::new();
        if let (true, Some(b)) = (text_background, &p.background) {
            if b.is_dir() {
                bg_dir_digest = dir_digest(b)?;
            } else {
                files.push(b);
            }
        }
        if roster.iter().any(|l| matches!(l, LearnerSpec::Hybrid { background: true, .. })) {
            if let Some(b) = &p.background_tokens {
                files.push(b);
            }
        }
        let uses_llm = roster.iter().any(|l| matches!(l, LearnerSpec::Llm { .. }));
        if uses_llm {
            if let Some(c) = &p.llm_cache {
                if c.exists() {
                    files.push(c);
                }
            }
        }
        let parts = [
            ingest_key.to_string(),
            json(roster),
            json(&self.cfg.special_tokens),
            json(&self.cfg.embedding_provider),
            if uses_llm { json(&self.cfg.llm) } else { String::new() },
            bg_dir_digest,
        ];
        let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
        self.key_of(Stage::Similarity, &refs, &files)
    }

    fn ingest(&mut self) -> ServiceResult<Ingested> {
        let cfg = &self.cfg;
        let jt = Table::from_path(&cfg.paths.judges)?;
        let vt = Table::from_path(&cfg.paths.ventures)?;
        let mut provenance = ProvenanceReport::default();
        provenance.dropped_columns.insert("judge".into(), dropped_columns(&jt, &cfg.judge_schema));
        provenance.dropped_columns.insert("venture".into(), dropped_columns(&vt, &cfg.venture_schema));
        let mut judges = ingest_judges(&jt, &cfg.judge_schema)?;
        let ventures = ingest_ventures(&vt, &cfg.venture_schema)?;
        check_tracks(&judges, &ventures, &cfg.tracks)?;
        let supplements = match &cfg.paths.supplements {
            Some(p) => read_supplements(fs::File::open(p)?)?,
            None => BTreeMap::new(),
        };
        let mut judge_docs = Vec::with_capacity(judges.len());
        for j in &mut judges {
            let (doc, outcome) = compose_judge(j, &cfg.judge_schema, supplements.get(&j.judge_id).map(String::as_str));
            provenance.record(&doc, &outcome);
            judge_docs.push(doc);
        }
        let venture_docs: Vec<Document> = ventures
            .iter()
            .map(|v| {
                let doc = compose_venture(v, &cfg.venture_schema);
                provenance.record(&doc, &Default::default());
                doc
            })
            .collect();
        let judge_ids: BTreeSet<&str> = judges.iter().map(|j| j.judge_id.as_str()).collect();
        let venture_ids: BTreeSet<&str> = ventures.iter().map(|v| v.venture_id.as_str()).collect();
        let mut coi_pairs = BTreeSet::new();
        let mut candidates: Vec<(String, String)> = judges
            .iter()
            .flat_map(|j| j.coi_venture_ids.iter().map(move |v| (j.judge_id.clone(), v.clone())))
            .collect();
        if let Some(p) = &cfg.paths.coi {
            candidates.extend(read_pairs(p)?);
        }
        for (j, v) in candidates {
            if judge_ids.contains(j.as_str()) && venture_ids.contains(v.as_str()) {
                coi_pairs.insert((j, v));
            } else {
                provenance.warnings.push(format!("conflict ({j}, {v}) names an unknown judge or venture; ignored"));
            }
        }
        let labels = match &cfg.paths.labels {
            Some(p) => read_labels(fs::File::open(p)?)?
                .into_iter()
                .map(|((j, v), l)| {
                    if !judge_ids.contains(j.as_str()) {
                        return Err(judgematch::Error::UnknownId(j).into());
                    }
                    if !venture_ids.contains(v.as_str()) {
                        return Err(judgematch::Error::UnknownId(v).into());
                    }
                    Ok((j, v, l.quality))
                })
                .collect::<ServiceResult<Vec<_>>>()?,
            None => Vec::new(),
        };
        Ok(Ingested { judges, ventures, judge_docs, venture_docs, coi_pairs, labels, provenance })
    }

    fn load_embeddings(&mut self, ingested: &Ingested) -> ServiceResult<Option<EmbeddingSet>> {
        if !self.cfg.learners.iter().any(LearnerSpec::needs_embeddings) {
            return Ok(None);
        }
        let set = match (&self.cfg.paths.embeddings, &self.cfg.embedding_provider) {
            (Some(path), _) => {
                if !path.exists() {
                    return Err(ServiceError::MissingPath(path.clone()));
                }
                load_embeddings(path, &self.cfg.special_tokens)?
            }
            (None, Some(provider)) => {
                let docs: Vec<(String, String)> = ingested
                    .judge_docs
                    .iter()
                    .chain(&ingested.venture_docs)
                    .map(|d| (d.doc_id.clone(), d.text.clone()))
                    .collect();
                let set =
                    crate::clients::fetch_embeddings(&provider.url, &docs, provider.batch_size, &self.cfg.special_tokens)?;
                let mut buf = Vec::new();
                judgematch::embedding::write_embeddings(&mut buf, &set.records)?;
                self.write_bytes("embeddings.jsonl", &buf)?;
                set
            }
            (None, None) => return Err(ServiceError::Config("no embedding source".into())),
        };
        for w in &set.warnings {
            log::warn!("{w}");
        }
        Ok(Some(set))
    }

    fn similarity(&mut self, ingested: &Ingested) -> ServiceResult<Similarities> {
        let embeddings = self.load_embeddings(ingested)?;
        let roster = &self.cfg.learners;
        for path in [&self.cfg.paths.background, &self.cfg.paths.background_tokens].into_iter().flatten() {
            if !path.exists() {
                return Err(ServiceError::MissingPath(path.clone()));
            }
        }
        let background_text = match &self.cfg.paths.background {
            Some(p) if roster.iter().any(|l| matches!(l, LearnerSpec::Tfidf { background: true, .. })) => {
                Some(BackgroundCorpus::from_path(p)?)
            }
            _ => None,
        };
        let background_tokens = match &self.cfg.paths.background_tokens {
            Some(p) if roster.iter().any(|l| matches!(l, LearnerSpec::Hybrid { background: true, .. })) => {
                Some(BackgroundCorpus::from_path(p)?)
            }
            _ => None,
        };
        let mut llm_pairs: BTreeSet<(String, String)> = BTreeSet::new();
        let uses_llm = roster.iter().any(|l| matches!(l, LearnerSpec::Llm { .. }));
        if uses_llm {
            for j in &ingested.judges {
                for v in &ingested.ventures {
                    let key = (j.judge_id.clone(), v.venture_id.clone());
                    if j.preferred_tracks.contains(&v.track) && !ingested.coi_pairs.contains(&key) {
                        llm_pairs.insert(key);
                    }
                }
            }
            llm_pairs.extend(ingested.labels.iter().map(|(j, v, _)| (j.clone(), v.clone())));
        }
        let inputs = LearnerInputs {
            judges: &ingested.judge_docs,
            ventures: &ingested.venture_docs,
            embeddings: embeddings.as_ref(),
            background_text: background_text.as_ref(),
            background_tokens: background_tokens.as_ref(),
            llm_pairs: &llm_pairs,
        };
        if !uses_llm {
            let (scores, report) = compute_scores(roster, &inputs, None)?;
            return Ok(Similarities { scores, report });
        }
        let cache = match &self.cfg.paths.llm_cache {
            Some(p) if p.exists() => ScoreCache::from_jsonl(std::io::BufReader::new(fs::File::open(p)?))?,
            _ => ScoreCache::default(),
        };
        let http;
        let client: Option<&dyn ChatClient> = match (&self.chat, self.cfg.llm.offline) {
            (_, true) => None,
            (Some(c), false) => Some(c.as_ref()),
            (None, false) => {
                let key = std::env::var(&self.cfg.llm.api_key_env).ok();
                http = crate::clients::HttpChatClient::new(&self.cfg.llm.base_url, key)?;
                Some(&http)
            }
        };
        let rt = LlmRuntime {
            client,
            cache: Mutex::new(cache),
            settings: &self.cfg.llm,
            retry: RetryPolicy::default(),
            audit: Mutex::new(Vec::new()),
        };
        let result = compute_scores(roster, &inputs, Some(&rt));
        let audit = rt.audit.into_inner().expect("audit lock");
        let cache = rt.cache.into_inner().expect("cache lock");
        if !audit.is_empty() {
            let mut buf = String::new();
            for rec in &audit {
                buf.push_str(&serde_json::to_string(rec)?);
                buf.push('\n');
            }
            fs::write(self.out.join("llm_audit.jsonl"), buf)?;
            if let Some(p) = &self.cfg.paths.llm_cache {
                cache.write_jsonl(fs::File::create(p)?)?;
            }
        }
        let (scores, report) = result?;
        Ok(Similarities { scores, report })
    }

    fn train(&mut self, ingested: &Ingested, scores: &LearnerScores) -> ServiceResult<Trained> {
        let rows: Vec<(PairKey, Vec<Option<f64>>, f64)> = ingested
            .labels
            .iter()
            .map(|(j, v, q)| {
                let pair = scores.pair(j, v).expect("labels validated at ingest");
                let cells = scores.learners.iter().map(|l| Some(pair[l])).collect();
                (PairKey::new(j, v), cells, *q as f64)
            })
            .collect();
        if rows.is_empty() {
            // Single learner without labels: min-max scaled, weight one.
            let id = &scores.learners[0];
            let vals = &scores.scores[id];
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let max = if max > min { max } else { min + 1.0 };
            let model = EnsembleModel {
                learners: vec![RetainedLearner { id: id.clone(), weight: 1.0, scale: LearnerScale { min, max } }],
                label_min: LABEL_MIN,
                label_max: LABEL_MAX,
                folds: self.cfg.ensemble.folds,
                threshold: self.cfg.ensemble.threshold,
                seed: self.cfg.ensemble.seed,
            };
            return Ok(Trained { model, report: None, features_csv: String::new() });
        }
        let fm = FeatureMatrix::new(scores.learners.clone(), rows)?;
        let mut csv = Vec::new();
        fm.write_csv(&mut csv)?;
        let (model, report) = cross_validate_prune(&fm, (&self.cfg.ensemble).into())?;
        Ok(Trained { model, report: Some(report), features_csv: String::from_utf8(csv).expect("csv is utf-8") })
    }

    fn assign(&mut self, ingested: &Ingested, scores: &LearnerScores, model: &EnsembleModel) -> ServiceResult<Assigned> {
        let mut constraints = self.cfg.constraints.to_constraints();
        constraints.coi_pairs = ingested.coi_pairs.clone();
        let judges: Vec<JudgeInfo> = ingested.judges.iter().map(JudgeInfo::from).collect();
        let ventures: Vec<VentureInfo> = ingested.ventures.iter().map(VentureInfo::from).collect();
        let grid = build_grid(
            &judges,
            &ventures,
            |j, v| scores.pair(j, v).and_then(|raw| model.predict(&raw).ok()).map(|p| p.similarity),
            &constraints,
        )?;
        let assignment = assign_maxmin(&grid, &constraints)?;
        let violations = validate(&assignment, &grid, &constraints);
        if !violations.is_empty() {
            return Err(ServiceError::Config(format!("solver produced violations: {violations:?}")));
        }
        Ok(Assigned { grid, constraints, assignment })
    }

    fn evaluate(&mut self, path: &Path) -> ServiceResult<TestResult> {
        let cohort = CohortScores::from_csv(fs::File::open(path)?)?;
        Ok(permutation_test(&cohort, self.cfg.evaluation.resamples, self.cfg.evaluation.seed)?)
    }

    fn write_assignment(&mut self, a: &Assigned) -> ServiceResult<()> {
        self.write_json(GRID_FILE, &a.grid)?;
        self.write_json(ASSIGNMENT_FILE, &(&a.constraints, &a.assignment))?;
        self.write_bytes("similarity_grid.csv", &export::grid_csv(&a.grid)?)?;
        self.write_bytes("assignment.csv", &export::assignment_csv(&a.assignment, &a.grid, None)?)?;
        for track in &self.cfg.tracks.clone() {
            if a.grid.ventures.iter().any(|v| &v.track == track) {
                let name = format!("assignment_{}.csv", export::slug(track));
                self.write_bytes(&name, &export::assignment_csv(&a.assignment, &a.grid, Some(track))?)?;
            }
        }
        let report = export::assignment_report(&a.assignment, &a.grid, &a.constraints);
        self.write_json(REPORT_FILE, &report)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, data: &T) -> ServiceResult<()> {
        let stamped = Stamped {
            engine_version: ENGINE_VERSION.to_string(),
            config_hash: self.config_hash.clone(),
            data,
        };
        let mut bytes = serde_json::to_vec_pretty(&stamped)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> ServiceResult<()> {
        fs::write(self.out.join(name), bytes)?;
        self.written.insert(name.to_string(), hex_digest(bytes));
        Ok(())
    }

    fn finish(&mut self) -> ServiceResult<()> {
        let manifest = Manifest {
            engine_version: ENGINE_VERSION.to_string(),
            config_hash: self.config_hash.clone(),
            artifacts: self.written.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.out.join(MANIFEST), bytes)?;
        let mut timing = serde_json::to_vec_pretty(&self.timings)?;
        timing.push(b'\n');
        fs::write(self.out.join(TIMING_LOG), timing)?;
        Ok(())
    }
}

fn json<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("config sections serialize")
}

fn file_digest(path: &Path) -> ServiceResult<String> {
    let bytes = fs::read(path).map_err(|_| ServiceError::MissingPath(path.to_path_buf()))?;
    Ok(hex_digest(&bytes))
}

fn dir_files(dir: &Path) -> ServiceResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> =
        fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
    files.sort();
    Ok(files)
}

fn dir_digest(dir: &Path) -> ServiceResult<String> {
    let mut buf = String::new();
    for f in dir_files(dir)? {
        buf.push_str(&f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        buf.push(':');
        buf.push_str(&file_digest(&f)?);
        buf.push('\n');
    }
    Ok(hex_digest(buf.as_bytes()))
}

/// CSV with `judge_id,venture_id` columns.
fn read_pairs(path: &Path) -> ServiceResult<Vec<(String, String)>> {
    let table = Table::from_path(path)?;
    let j = table.column("judge_id")?;
    let v = table.column("venture_id")?;
    Ok(table
        .rows
        .iter()
        .map(|r| (r.get(j).cloned().unwrap_or_default(), r.get(v).cloned().unwrap_or_default()))
        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
        .collect())
}

/// Load a stamped JSON artifact written by a previous run.
pub fn read_artifact<T: DeserializeOwned>(out_dir: &Path, name: &str) -> ServiceResult<Stamped<T>> {
    let path = out_dir.join(name);
    let bytes = fs::read(&path).map_err(|_| ServiceError::MissingArtifact(path.clone()))?;
    Ok(serde_json::from_slice(&bytes)?)
}
