use crate::assignment::InfeasibilityCertificate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("missing id at row {row}")]
    MissingId { row: usize },

    #[error("duplicate ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),

    #[error("invalid record at row {row}: {message}")]
    InvalidRecord { row: usize, message: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("embedding record `{doc_id}`: {message}")]
    Embedding { doc_id: String, message: String },

    #[error("embedding file mixes {field} values `{first}` and `{other}`")]
    MixedEmbeddingFile {
        field: &'static str,
        first: String,
        other: String,
    },

    #[error("tokenizer mismatch: idf table built for `{table}`, embeddings use `{embeddings}`")]
    TokenizerMismatch { table: String, embeddings: String },

    #[error("document `{doc_id}`: {oov} of {total} tokens missing from the idf table (limit {limit:.0}%)")]
    VocabularyMismatch {
        doc_id: String,
        oov: usize,
        total: usize,
        limit: f64,
    },

    #[error("model mismatch: `{0}` vs `{1}`")]
    ModelMismatch(String, String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty feature matrix")]
    EmptyFeatures,

    #[error("no learner has weight > {threshold} in every fold; relax the pruning threshold")]
    NoSurvivors { threshold: f64 },

    #[error("missing score for learner `{0}`")]
    MissingLearner(String),

    #[error("infeasible assignment: {0}")]
    Infeasible(InfeasibilityCertificate),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("pair ({judge}, {venture}) is not assigned")]
    NotAssigned { judge: String, venture: String },

    #[error("unparseable score in response: {raw:?}")]
    UnparseableScore { raw: String },

    #[error("chat service failed after {attempts} attempts: {message}")]
    Service { attempts: usize, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
