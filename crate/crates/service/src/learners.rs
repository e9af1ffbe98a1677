//! Raw base-learner scores over the judge × venture grid.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use judgematch::corpus::{Document, WHITESPACE_TOKENIZER};
use judgematch::embedding::{
    align_idf, pool_document, token_score_from_sums, weighted_unit_sum, EmbeddingSet, IdfWeights,
    TokenEmbeddings,
};
use judgematch::lexical::{cosine_dense, cosine_sparse, fit_idf, tfidf_vector, BackgroundCorpus, IdfScheme};
use judgematch::llm::{score_pair, CachedScore, ChatClient, PromptConfig, RetryPolicy, ScoreCache, ShotExample};
use serde::{Deserialize, Serialize};

use crate::config::{LearnerSpec, LlmSettings, Pooling};
use crate::error::{ServiceError, ServiceResult};

/// Per-learner score matrices, judge-major over sorted ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerScores {
    pub judges: Vec<String>,
    pub ventures: Vec<String>,
    pub learners: Vec<String>,
    /// `scores[learner][j * ventures.len() + v]`.
    pub scores: BTreeMap<String, Vec<f64>>,
    /// Degenerate cells replaced by the learner's mean score.
    pub imputed: BTreeMap<String, usize>,
}

impl LearnerScores {
    pub fn judge_index(&self, id: &str) -> Option<usize> {
        self.judges.binary_search_by(|j| j.as_str().cmp(id)).ok()
    }

    pub fn venture_index(&self, id: &str) -> Option<usize> {
        self.ventures.binary_search_by(|v| v.as_str().cmp(id)).ok()
    }

    /// All learner scores for one pair.
    pub fn pair(&self, judge: &str, venture: &str) -> Option<BTreeMap<String, f64>> {
        let c = self.judge_index(judge)? * self.ventures.len() + self.venture_index(venture)?;
        Some(self.scores.iter().map(|(k, v)| (k.clone(), v[c])).collect())
    }
}

pub struct LearnerInputs<'a> {
    pub judges: &'a [Document],
    pub ventures: &'a [Document],
    pub embeddings: Option<&'a EmbeddingSet>,
    pub background_text: Option<&'a BackgroundCorpus>,
    pub background_tokens: Option<&'a BackgroundCorpus>,
    /// Pairs the llm learner must score; others get the mean.
    pub llm_pairs: &'a BTreeSet<(String, String)>,
}

pub struct LlmRuntime<'a> {
    pub client: Option<&'a dyn ChatClient>,
    pub cache: Mutex<ScoreCache>,
    pub settings: &'a LlmSettings,
    pub retry: RetryPolicy,
    /// `(request, raw response)` for every live call.
    pub audit: Mutex<Vec<serde_json::Value>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub imputed: BTreeMap<String, usize>,
    pub idf_mismatch: BTreeMap<String, MismatchSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MismatchSummary {
    pub documents: usize,
    pub tokens: usize,
    pub missing: usize,
}

pub fn compute_scores(
    specs: &[LearnerSpec],
    inputs: &LearnerInputs,
    llm: Option<&LlmRuntime>,
) -> ServiceResult<(LearnerScores, SimilarityReport)> {
    let mut judges: Vec<&Document> = inputs.judges.iter().collect();
    let mut ventures: Vec<&Document> = inputs.ventures.iter().collect();
    judges.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
    ventures.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
    let mut out = LearnerScores {
        judges: judges.iter().map(|d| d.entity_id.clone()).collect(),
        ventures: ventures.iter().map(|d| d.entity_id.clone()).collect(),
        learners: specs.iter().map(|s| s.id().to_string()).collect(),
        scores: BTreeMap::new(),
        imputed: BTreeMap::new(),
    };
    let mut report = SimilarityReport::default();
    for spec in specs {
        let raw = match spec {
            LearnerSpec::Tfidf { variant, background, .. } => {
                tfidf_scores(&judges, &ventures, (*variant).into(), background.then_some(inputs.background_text).flatten())?
            }
            LearnerSpec::Embedding { pooling, .. } => {
                let set = inputs.embeddings.ok_or_else(|| ServiceError::Config("no embeddings loaded".into()))?;
                embedding_scores(&judges, &ventures, set, *pooling, None)?
            }
            LearnerSpec::Hybrid { id, pooling, idf, background } => {
                let set = inputs.embeddings.ok_or_else(|| ServiceError::Config("no embeddings loaded".into()))?;
                let bg = if *background { inputs.background_tokens } else { None };
                let (weights, summary) = hybrid_weights(&judges, &ventures, set, (*idf).into(), bg)?;
                report.idf_mismatch.insert(id.clone(), summary);
                embedding_scores(&judges, &ventures, set, *pooling, Some(&weights))?
            }
            LearnerSpec::Llm { shots, .. } => {
                let rt = llm.ok_or_else(|| ServiceError::Config("llm learner configured without a runtime".into()))?;
                llm_scores(&judges, &ventures, *shots, inputs.llm_pairs, rt)?
            }
        };
        let present: Vec<f64> = raw.iter().flatten().copied().collect();
        let mean = if present.is_empty() { 0.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
        let missing = raw.len() - present.len();
        if missing > 0 {
            report.warnings.push(format!("learner `{}`: {missing} degenerate cells set to the mean {mean:.6}", spec.id()));
        }
        out.imputed.insert(spec.id().to_string(), missing);
        out.scores.insert(spec.id().to_string(), raw.into_iter().map(|x| x.unwrap_or(mean)).collect());
    }
    report.imputed = out.imputed.clone();
    Ok((out, report))
}

fn tfidf_scores(
    judges: &[&Document],
    ventures: &[&Document],
    variant: judgematch::lexical::TfVariant,
    background: Option<&BackgroundCorpus>,
) -> ServiceResult<Vec<Option<f64>>> {
    let corpus: Vec<&[String]> = judges.iter().chain(ventures).map(|d| d.tokens.as_slice()).collect();
    let idf = fit_idf(&corpus, WHITESPACE_TOKENIZER, variant.scheme(), background)?;
    let jv: Vec<_> = judges.iter().map(|d| tfidf_vector(&d.tokens, &idf, variant).0).collect();
    let vv: Vec<_> = ventures.iter().map(|d| tfidf_vector(&d.tokens, &idf, variant).0).collect();
    let mut out = Vec::with_capacity(jv.len() * vv.len());
    for a in &jv {
        for b in &vv {
            out.push(cosine_sparse(a, b).value_opt());
        }
    }
    Ok(out)
}

fn lookup<'a>(set: &'a EmbeddingSet, doc: &Document) -> ServiceResult<&'a TokenEmbeddings> {
    set.get(&doc.doc_id).ok_or_else(|| {
        ServiceError::Engine(judgematch::Error::Embedding {
            doc_id: doc.doc_id.clone(),
            message: "no embedding record for this document".into(),
        })
    })
}

fn hybrid_weights(
    judges: &[&Document],
    ventures: &[&Document],
    set: &EmbeddingSet,
    scheme: IdfScheme,
    background: Option<&BackgroundCorpus>,
) -> ServiceResult<(BTreeMap<String, IdfWeights>, MismatchSummary)> {
    let docs: Vec<&TokenEmbeddings> =
        judges.iter().chain(ventures).map(|d| lookup(set, d)).collect::<ServiceResult<_>>()?;
    let corpus: Vec<&[String]> = docs.iter().map(|te| te.tokens.as_slice()).collect();
    let idf = fit_idf(&corpus, &set.tokenizer_id, scheme, background)?;
    let mut summary = MismatchSummary::default();
    let mut out = BTreeMap::new();
    for te in docs {
        let (w, rep) = align_idf(te, &idf)?;
        summary.documents += 1;
        summary.tokens += rep.total_tokens;
        summary.missing += rep.missing_tokens.len();
        out.insert(te.doc_id.clone(), w);
    }
    Ok((out, summary))
}

enum Pooled {
    Doc(Option<Vec<f64>>),
    Token(Option<Vec<f64>>, usize),
}

fn embedding_scores(
    judges: &[&Document],
    ventures: &[&Document],
    set: &EmbeddingSet,
    pooling: Pooling,
    weights: Option<&BTreeMap<String, IdfWeights>>,
) -> ServiceResult<Vec<Option<f64>>> {
    let prep = |d: &Document| -> ServiceResult<Pooled> {
        let te = lookup(set, d)?;
        let w = weights.and_then(|m| m.get(&te.doc_id));
        Ok(match pooling {
            Pooling::Document => Pooled::Doc(pool_document(te, w)?.map(|p| p.vector)),
            Pooling::Token => Pooled::Token(weighted_unit_sum(te, w)?, te.len()),
        })
    };
    let jp: Vec<Pooled> = judges.iter().map(|d| prep(d)).collect::<ServiceResult<_>>()?;
    let vp: Vec<Pooled> = ventures.iter().map(|d| prep(d)).collect::<ServiceResult<_>>()?;
    let clamp = weights.is_none();
    let mut out = Vec::with_capacity(jp.len() * vp.len());
    for a in &jp {
        for b in &vp {
            let s = match (a, b) {
                (Pooled::Doc(Some(x)), Pooled::Doc(Some(y))) => cosine_dense(x, y)?.value_opt(),
                (Pooled::Token(x, lx), Pooled::Token(y, ly)) => {
                    let s = token_score_from_sums(x.as_deref(), *lx, y.as_deref(), *ly).value_opt();
                    if clamp {
                        s.map(|v| v.clamp(-1.0, 1.0))
                    } else {
                        s
                    }
                }
                _ => None,
            };
            out.push(s);
        }
    }
    Ok(out)
}

fn llm_scores(
    judges: &[&Document],
    ventures: &[&Document],
    shots: usize,
    pairs: &BTreeSet<(String, String)>,
    rt: &LlmRuntime,
) -> ServiceResult<Vec<Option<f64>>> {
    let cfg = PromptConfig {
        model: rt.settings.model.clone(),
        temperature: 0.0,
        examples: rt.settings.examples[..shots]
            .iter()
            .map(|e| ShotExample { venture_text: e.venture_text.clone(), judge_text: e.judge_text.clone(), score: e.score })
            .collect(),
    };
    cfg.validate()?;
    let nv = ventures.len();
    let mut out = vec![None; judges.len() * nv];
    let mut todo = Vec::new();
    {
        let cache = rt.cache.lock().expect("cache lock");
        for (j, jd) in judges.iter().enumerate() {
            for (v, vd) in ventures.iter().enumerate() {
                if !pairs.contains(&(jd.entity_id.clone(), vd.entity_id.clone())) {
                    continue;
                }
                match cache.get(&jd.entity_id, &vd.entity_id, shots) {
                    Some(s) => out[j * nv + v] = Some(s as f64),
                    None => todo.push((j, v)),
                }
            }
        }
    }
    if todo.is_empty() {
        return Ok(out);
    }
    let client = match (rt.client, rt.settings.offline) {
        (Some(c), false) => c,
        _ => {
            let (j, v) = todo[0];
            return Err(ServiceError::Config(format!(
                "offline llm run has no cached score for ({}, {}) at {shots} shots ({} pairs missing)",
                judges[j].entity_id,
                ventures[v].entity_id,
                todo.len()
            )));
        }
    };
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, ServiceResult<u8>)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..rt.settings.parallelism.max(1).min(todo.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(j, v)) = todo.get(k) else { break };
                let r = score_pair(client, &ventures[v].text, &judges[j].text, &cfg, rt.retry).map(|scored| {
                    rt.audit.lock().expect("audit lock").push(serde_json::json!({
                        "judge_id": judges[j].entity_id,
                        "venture_id": ventures[v].entity_id,
                        "request": scored.request,
                        "response": scored.raw_response,
                        "attempts": scored.attempts,
                    }));
                    scored.score
                });
                results.lock().expect("results lock").push((k, r.map_err(ServiceError::from)));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(k, _)| *k);
    let mut cache = rt.cache.lock().expect("cache lock");
    for (k, r) in results {
        let (j, v) = todo[k];
        let score = r?;
        cache.insert(CachedScore {
            judge_id: judges[j].entity_id.clone(),
            venture_id: ventures[v].entity_id.clone(),
            shots,
            score,
        });
        out[j * nv + v] = Some(score as f64);
    }
    Ok(out)
}
