//! Pipeline runner, artifact export and review service for `judgematch`.

pub mod clients;
pub mod config;
pub mod error;
pub mod export;
pub mod learners;
pub mod pipeline;
pub mod server;

pub use config::RunConfig;
pub use error::{ServiceError, ServiceResult};
pub use pipeline::{Pipeline, Stage};
