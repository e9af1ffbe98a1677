use std::path::PathBuf;

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),

    #[error("missing input file {}", .0.display())]
    MissingPath(PathBuf),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<ServiceError>,
    },

    #[error("missing artifact {}; run the pipeline first", .0.display())]
    MissingArtifact(PathBuf),

    #[error("http: {0}")]
    Http(String),

    #[error(transparent)]
    Engine(#[from] judgematch::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ServiceError {
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ ServiceError::Stage { .. } => e,
            e => ServiceError::Stage { stage, source: Box::new(e) },
        }
    }
}
