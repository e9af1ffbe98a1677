//! TF-IDF learners: IDF fitting (optionally with a background corpus),
//! standard and augmented term weighting, sparse and dense cosine.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{sanitize, whitespace_tokens, WHITESPACE_TOKENIZER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfScheme {
    /// `ln((1 + N) / (1 + df)) + 1`
    Smoothed,
    /// `ln(N / df)`
    NonSmoothed,
}

impl IdfScheme {
    pub fn weight(self, n_docs: usize, df: usize) -> f64 {
        let n = n_docs as f64;
        let df = df as f64;
        match self {
            IdfScheme::Smoothed => ((1.0 + n) / (1.0 + df)).ln() + 1.0,
            IdfScheme::NonSmoothed => (n / df).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfVariant {
    /// Raw counts times idf.
    Standard,
    /// `0.5 + 0.5 * count / max_count` times idf.
    Augmented,
}

impl TfVariant {
    /// The idf scheme each variant is paired with.
    pub fn scheme(self) -> IdfScheme {
        match self {
            TfVariant::Standard => IdfScheme::Smoothed,
            TfVariant::Augmented => IdfScheme::NonSmoothed,
        }
    }
}

/// Tokenized documents used only for document-frequency counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BackgroundCorpus {
    pub tokenizer_id: String,
    pub documents: Vec<Vec<String>>,
}

#[derive(Deserialize)]
struct BackgroundRecord {
    #[allow(dead_code)]
    id: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    tokenizer_id: Option<String>,
}

impl BackgroundCorpus {
    pub fn count(&self) -> usize {
        self.documents.len()
    }

    /// Sanitize and whitespace-tokenize plain texts.
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        BackgroundCorpus {
            tokenizer_id: WHITESPACE_TOKENIZER.to_string(),
            documents: texts.iter().map(|t| whitespace_tokens(&sanitize(t.as_ref()))).collect(),
        }
    }

    /// JSON Lines with `{"id", "text"}` records, or pre-tokenized
    /// `{"id", "tokenizer_id", "tokens"}` records (one tokenizer per file).
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut texts = Vec::new();
        let mut tokenized = Vec::new();
        let mut tokenizer: Option<String> = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: BackgroundRecord = serde_json::from_str(&line)?;
            match (rec.tokens, rec.text) {
                (Some(tokens), _) => {
                    let tid = rec.tokenizer_id.ok_or_else(|| Error::InvalidRecord {
                        row: i + 1,
                        message: "tokens given without tokenizer_id".into(),
                    })?;
                    match &tokenizer {
                        Some(t) if *t != tid => {
                            return Err(Error::MixedEmbeddingFile {
                                field: "tokenizer_id",
                                first: t.clone(),
                                other: tid,
                            })
                        }
                        _ => tokenizer = Some(tid),
                    }
                    tokenized.push(tokens);
                }
                (None, Some(text)) => texts.push(text),
                (None, None) => {
                    return Err(Error::InvalidRecord {
                        row: i + 1,
                        message: "record has neither text nor tokens".into(),
                    })
                }
            }
        }
        match (texts.is_empty(), tokenized.is_empty()) {
            (_, true) => Ok(Self::from_texts(&texts)),
            (true, false) => Ok(BackgroundCorpus {
                tokenizer_id: tokenizer.unwrap_or_default(),
                documents: tokenized,
            }),
            (false, false) => Err(Error::InvalidInput(
                "background file mixes text and token records".into(),
            )),
        }
    }

    /// A `.jsonl` file, or a directory of plain-text files (sorted by name).
    pub fn from_path(path: &Path) -> Result<Self> {
        if path.is_dir() {
            let mut files: Vec<_> = std::fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            let texts = files
                .iter()
                .map(std::fs::read_to_string)
                .collect::<std::io::Result<Vec<_>>>()?;
            Ok(Self::from_texts(&texts))
        } else {
            Self::from_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub scheme: IdfScheme,
    pub tokenizer_id: String,
    pub corpus_size: usize,
    pub includes_background: bool,
    pub weights: BTreeMap<String, f64>,
}

impl IdfTable {
    /// Weight for `term`; terms never seen while fitting get the table maximum.
    pub fn idf(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or_else(|| self.max_idf())
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.weights.get(term).copied()
    }

    pub fn max_idf(&self) -> f64 {
        self.weights.values().copied().fold(0.0, f64::max)
    }

    pub fn mean_idf(&self) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        self.weights.values().sum::<f64>() / self.weights.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Count document frequencies over `corpus` (plus `background`) and convert
/// them to idf weights.
pub fn fit_idf<D: AsRef<[String]>>(
    corpus: &[D],
    tokenizer_id: &str,
    scheme: IdfScheme,
    background: Option<&BackgroundCorpus>,
) -> Result<IdfTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if let Some(bg) = background {
        if bg.tokenizer_id != tokenizer_id {
            return Err(Error::TokenizerMismatch {
                table: tokenizer_id.to_string(),
                embeddings: bg.tokenizer_id.clone(),
            });
        }
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let bg_docs = background.map(|b| b.documents.as_slice()).unwrap_or(&[]);
    let docs = corpus
        .iter()
        .map(|d| d.as_ref())
        .chain(bg_docs.iter().map(|d| d.as_slice()));
    let mut n_docs = 0usize;
    for doc in docs {
        n_docs += 1;
        let uniq: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
        for t in uniq {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let weights = df
        .into_iter()
        .map(|(t, f)| (t.to_string(), scheme.weight(n_docs, f)))
        .collect();
    Ok(IdfTable {
        scheme,
        tokenizer_id: tokenizer_id.to_string(),
        corpus_size: n_docs,
        includes_background: background.is_some_and(|b| b.count() > 0),
        weights,
    })
}

/// Sparse vector as a term-sorted list of nonzero weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(String, f64)>,
}

impl SparseVector {
    /// Builds from arbitrary (term, weight) pairs; zero weights are dropped
    /// and duplicate terms summed.
    pub fn from_pairs<I: IntoIterator<Item = (String, f64)>>(pairs: I) -> Self {
        let mut map: BTreeMap<String, f64> = BTreeMap::new();
        for (t, w) in pairs {
            *map.entry(t).or_insert(0.0) += w;
        }
        SparseVector {
            entries: map.into_iter().filter(|(_, w)| *w != 0.0).collect(),
        }
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn get(&self, term: &str) -> Option<f64> {
        self.entries
            .binary_search_by(|(t, _)| t.as_str().cmp(term))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn scale(&mut self, c: f64) {
        for (_, w) in &mut self.entries {
            *w *= c;
        }
    }
}

/// A similarity value plus whether it came from degenerate input (a zero
/// vector or an empty document), in which case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    pub fn new(value: f64) -> Self {
        Score { value, degenerate: false }
    }

    pub fn degenerate() -> Self {
        Score { value: 0.0, degenerate: true }
    }

    /// `None` for degenerate scores.
    pub fn value_opt(self) -> Option<f64> {
        (!self.degenerate).then_some(self.value)
    }
}

/// Weighted, L2-normalized term vector. Terms absent from `idf` are left out.
/// Empty documents give a zero vector and `degenerate = true`.
pub fn tfidf_vector(tokens: &[String], idf: &IdfTable, variant: TfVariant) -> (SparseVector, bool) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let max_count = counts.values().copied().max().unwrap_or(0);
    let pairs = counts.iter().filter_map(|(t, &c)| {
        let w = idf.get(t)?;
        let tf = match variant {
            TfVariant::Standard => c as f64,
            TfVariant::Augmented => 0.5 + 0.5 * c as f64 / max_count as f64,
        };
        Some((t.to_string(), tf * w))
    });
    let mut v = SparseVector::from_pairs(pairs);
    let norm = v.norm();
    if norm == 0.0 {
        return (SparseVector::default(), true);
    }
    v.scale(1.0 / norm);
    (v, false)
}

pub fn cosine_sparse(a: &SparseVector, b: &SparseVector) -> Score {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Score::degenerate();
    }
    Score::new((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine_dense(a: &[f64], b: &[f64]) -> Result<Score> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("{} vs {}", a.len(), b.len())));
    }
    let (na, nb) = (norm2(a), norm2(b));
    if na == 0.0 || nb == 0.0 {
        return Ok(Score::degenerate());
    }
    Ok(Score::new((dot(a, b) / (na * nb)).clamp(-1.0, 1.0)))
}
