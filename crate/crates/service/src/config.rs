//! Run configuration (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use judgematch::assignment::ConstraintSet;
use judgematch::corpus::{Role, SchemaMap};
use judgematch::ensemble::CvConfig;
use judgematch::evaluation::DEFAULT_RESAMPLES;
use judgematch::lexical::{IdfScheme, TfVariant};
use judgematch::llm::DEFAULT_MODEL;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub judges: PathBuf,
    pub ventures: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    /// Plain-text background corpus (directory or `{"id","text"}` JSONL)
    /// for word-level IDF.
    #[serde(default)]
    pub background: Option<PathBuf>,
    /// Background corpus tokenized with the embedding tokenizer
    /// (`{"id","tokenizer_id","tokens"}` JSONL) for hybrid learners.
    #[serde(default)]
    pub background_tokens: Option<PathBuf>,
    #[serde(default)]
    pub supplements: Option<PathBuf>,
    /// Extra conflict pairs: CSV `judge_id,venture_id`.
    #[serde(default)]
    pub coi: Option<PathBuf>,
    /// Cohort scores for the evaluation stage.
    #[serde(default)]
    pub cohort_scores: Option<PathBuf>,
    #[serde(default)]
    pub llm_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Document,
    Token,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    Tfidf {
        id: String,
        variant: TfVariantName,
        #[serde(default)]
        background: bool,
    },
    Embedding {
        id: String,
        pooling: Pooling,
    },
    Hybrid {
        id: String,
        pooling: Pooling,
        idf: IdfSchemeName,
        #[serde(default)]
        background: bool,
    },
    Llm {
        id: String,
        #[serde(default)]
        shots: usize,
    },
}

impl LearnerSpec {
    pub fn id(&self) -> &str {
        match self {
            LearnerSpec::Tfidf { id, .. }
            | LearnerSpec::Embedding { id, .. }
            | LearnerSpec::Hybrid { id, .. }
            | LearnerSpec::Llm { id, .. } => id,
        }
    }

    pub fn needs_embeddings(&self) -> bool {
        matches!(self, LearnerSpec::Embedding { .. } | LearnerSpec::Hybrid { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfVariantName {
    Standard,
    Augmented,
}

impl From<TfVariantName> for TfVariant {
    fn from(v: TfVariantName) -> Self {
        match v {
            TfVariantName::Standard => TfVariant::Standard,
            TfVariantName::Augmented => TfVariant::Augmented,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfSchemeName {
    Smoothed,
    NonSmoothed,
}

impl From<IdfSchemeName> for IdfScheme {
    fn from(v: IdfSchemeName) -> Self {
        match v {
            IdfSchemeName::Smoothed => IdfScheme::Smoothed,
            IdfSchemeName::NonSmoothed => IdfScheme::NonSmoothed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSettings {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_folds() -> usize {
    5
}

fn default_threshold() -> f64 {
    0.01
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings { folds: default_folds(), threshold: default_threshold(), seed: 0 }
    }
}

impl From<&EnsembleSettings> for CvConfig {
    fn from(e: &EnsembleSettings) -> Self {
        CvConfig { folds: e.folds, threshold: e.threshold, seed: e.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSettings {
    #[serde(default = "default_panel")]
    pub panel_size: usize,
    #[serde(default = "default_load")]
    pub judge_load_max: usize,
    #[serde(default)]
    pub panel_size_by_track: BTreeMap<String, usize>,
}

fn default_panel() -> usize {
    judgematch::assignment::DEFAULT_PANEL_SIZE
}

fn default_load() -> usize {
    judgematch::assignment::DEFAULT_LOAD_MAX
}

impl Default for ConstraintSettings {
    fn default() -> Self {
        ConstraintSettings {
            panel_size: default_panel(),
            judge_load_max: default_load(),
            panel_size_by_track: BTreeMap::new(),
        }
    }
}

impl ConstraintSettings {
    pub fn to_constraints(&self) -> ConstraintSet {
        ConstraintSet {
            panel_size: self.panel_size,
            panel_size_by_track: self.panel_size_by_track.clone(),
            judge_load_max: self.judge_load_max,
            coi_pairs: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSettings {
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings { resamples: default_resamples(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotExampleConfig {
    pub venture_text: String,
    pub judge_text: String,
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSettings {
    #[serde(default = "default_llm_url")]
    pub base_url: String,
    #[serde(default = "default_llm_model")]
    pub model: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// Replay scores from the cache only; never call the service.
    #[serde(default)]
    pub offline: bool,
    #[serde(default)]
    pub examples: Vec<ShotExampleConfig>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_llm_url() -> String {
    "https://api.openai.com/v1".into()
}

fn default_llm_model() -> String {
    DEFAULT_MODEL.into()
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".into()
}

fn default_parallelism() -> usize {
    4
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            base_url: default_llm_url(),
            model: default_llm_model(),
            api_key_env: default_api_key_env(),
            offline: false,
            examples: Vec::new(),
            parallelism: default_parallelism(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingProvider {
    /// Base URL; documents are posted to `<url>/embed`.
    pub url: String,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

fn default_batch() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub judge_schema: SchemaMap,
    pub venture_schema: SchemaMap,
    pub tracks: Vec<String>,
    pub learners: Vec<LearnerSpec>,
    #[serde(default)]
    pub special_tokens: Vec<String>,
    #[serde(default)]
    pub ensemble: EnsembleSettings,
    #[serde(default)]
    pub constraints: ConstraintSettings,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
    #[serde(default)]
    pub llm: LlmSettings,
    #[serde(default)]
    pub embedding_provider: Option<EmbeddingProvider>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> ServiceResult<Self> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    /// Parse a config file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> ServiceResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        fix(&mut p.judges);
        fix(&mut p.ventures);
        for o in [
            &mut p.labels,
            &mut p.embeddings,
            &mut p.background,
            &mut p.background_tokens,
            &mut p.supplements,
            &mut p.coi,
            &mut p.cohort_scores,
            &mut p.llm_cache,
        ] {
            if let Some(p) = o.as_mut() {
                fix(p);
            }
        }
    }

    pub fn apply_seed_override(&mut self, seed: u64) {
        self.ensemble.seed = seed;
        self.evaluation.seed = seed;
    }

    /// Structural checks plus existence of every referenced file.
    pub fn validate(&self) -> ServiceResult<()> {
        let bad = |m: String| Err(ServiceError::Config(m));
        if self.judge_schema.role != Role::Judge || self.venture_schema.role != Role::Venture {
            return bad("judge_schema/venture_schema roles are swapped".into());
        }
        self.judge_schema.validate()?;
        self.venture_schema.validate()?;
        if self.learners.is_empty() {
            return bad("learner roster is empty".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for l in &self.learners {
            if !ids.insert(l.id()) {
                return bad(format!("learner id `{}` used twice", l.id()));
            }
            if let LearnerSpec::Llm { shots, .. } = l {
                if *shots > self.llm.examples.len() {
                    return bad(format!("learner `{}` wants {shots} shots but {} examples are configured", l.id(), self.llm.examples.len()));
                }
            }
        }
        if self.tracks.is_empty() {
            return bad("no tracks configured".into());
        }
        if self.learners.len() > 1 && self.paths.labels.is_none() {
            return bad("a multi-learner roster needs a labels file".into());
        }
        if self.learners.iter().any(|l| l.needs_embeddings())
            && self.paths.embeddings.is_none()
            && self.embedding_provider.is_none()
        {
            return bad("embedding learners need paths.embeddings or an embedding_provider".into());
        }
        let needs_bg_text = self.learners.iter().any(|l| matches!(l, LearnerSpec::Tfidf { background: true, .. }));
        if needs_bg_text && self.paths.background.is_none() {
            return bad("a tfidf learner uses background IDF but paths.background is unset".into());
        }
        let needs_bg_tokens = self.learners.iter().any(|l| matches!(l, LearnerSpec::Hybrid { background: true, .. }));
        if needs_bg_tokens && self.paths.background_tokens.is_none() {
            return bad("a hybrid learner uses background IDF but paths.background_tokens is unset".into());
        }
        // Stage-specific inputs are checked by the stage that reads them.
        let p = &self.paths;
        let mut required: Vec<&Path> = vec![&p.judges, &p.ventures];
        for o in [&p.labels, &p.supplements, &p.coi] {
            if let Some(path) = o {
                required.push(path);
            }
        }
        for path in required {
            if !path.exists() {
                return Err(ServiceError::MissingPath(path.to_path_buf()));
            }
        }
        self.constraints.to_constraints().validate()?;
        Ok(())
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex_digest(self.canonical_json().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
pub(crate) const SAMPLE: &str = r#"
tracks = ["Open", "Social Impact"]

[paths]
judges = "judges.csv"
ventures = "ventures.csv"
labels = "labels.csv"

[judge_schema]
role = "judge"
id_column = "judge_id"
selected_fields = ["bio", "expertise"]
track_column = "tracks"

[venture_schema]
role = "venture"
id_column = "venture_id"
selected_fields = ["summary"]
track_column = "track"

[[learners]]
kind = "tfidf"
id = "tfidf_standard"
variant = "standard"

[[learners]]
kind = "tfidf"
id = "tfidf_augmented"
variant = "augmented"

[constraints]
panel_size = 2
judge_load_max = 3
"#;
