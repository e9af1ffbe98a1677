//! Review service: JSON API over the current assignment.
//!
//! State changes only through `POST /assignment/swap`. Every committed swap
//! is appended to `audit.jsonl` next to the run artifacts, and the log is
//! replayed on startup.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use judgematch::assignment::{
    suggest_replacements, validate, AssignedPair, Assignment, Candidate, CellStatus, ConstraintSet, Optimality,
    SimilarityGrid, Violation,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{ServiceError, ServiceResult};
use crate::export::{assignment_report, AssignmentReport};
use crate::pipeline::{read_artifact, ASSIGNMENT_FILE, GRID_FILE};

pub const AUDIT_LOG: &str = "audit.jsonl";
pub const DEFAULT_SUGGESTIONS: usize = 10;
pub const ADDR_ENV: &str = "JUDGEMATCH_ADDR";
pub const TOKEN_ENV: &str = "JUDGEMATCH_TOKEN";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapRequest {
    pub venture_id: String,
    pub remove_judge_id: String,
    pub add_judge_id: String,
    pub expected_version: u64,
    #[serde(default)]
    pub actor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// Version after the swap.
    pub version: u64,
    pub timestamp: String,
    pub actor: String,
    pub venture_id: String,
    pub remove_judge_id: String,
    pub add_judge_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwapError {
    VersionConflict { expected: u64, current: u64 },
    NotAssigned { judge_id: String, venture_id: String },
    Violation(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentView {
    pub version: u64,
    pub config_hash: String,
    pub optimality: Optimality,
    pub pairs: Vec<AssignedPair>,
}

#[derive(Debug, Clone)]
pub struct ReviewState {
    pub grid: SimilarityGrid,
    pub constraints: ConstraintSet,
    pub initial: Assignment,
    pub assignment: Assignment,
    pub version: u64,
    pub config_hash: String,
    audit_path: Option<PathBuf>,
}

impl ReviewState {
    pub fn new(grid: SimilarityGrid, constraints: ConstraintSet, assignment: Assignment, config_hash: &str) -> Self {
        ReviewState {
            grid,
            constraints,
            initial: assignment.clone(),
            assignment,
            version: 0,
            config_hash: config_hash.to_string(),
            audit_path: None,
        }
    }

    /// Load the run artifacts from `out_dir` and replay its audit log.
    pub fn load(out_dir: &Path) -> ServiceResult<Self> {
        let grid = read_artifact::<SimilarityGrid>(out_dir, GRID_FILE)?;
        let stamped = read_artifact::<(ConstraintSet, Assignment)>(out_dir, ASSIGNMENT_FILE)?;
        let (constraints, assignment) = stamped.data;
        let mut state = ReviewState::new(grid.data, constraints, assignment, &stamped.config_hash);
        let audit_path = out_dir.join(AUDIT_LOG);
        if audit_path.exists() {
            let text = fs::read_to_string(&audit_path)?;
            let entries = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str::<AuditEntry>)
                .collect::<Result<Vec<_>, _>>()?;
            state.replay(&entries)?;
            log::info!("replayed {} audit entries; version {}", entries.len(), state.version);
        }
        state.audit_path = Some(audit_path);
        Ok(state)
    }

    /// Re-apply logged swaps in order, starting from the current state.
    pub fn replay(&mut self, entries: &[AuditEntry]) -> ServiceResult<()> {
        for e in entries {
            if e.version != self.version + 1 {
                return Err(ServiceError::Config(format!(
                    "audit log out of sequence: version {} after {}",
                    e.version, self.version
                )));
            }
            let next = self
                .apply(&e.venture_id, &e.remove_judge_id, &e.add_judge_id)
                .map_err(|err| ServiceError::Config(format!("audit entry {} does not replay: {err:?}", e.version)))?;
            self.assignment = next;
            self.version = e.version;
        }
        Ok(())
    }

    /// The assignment after the swap, if it passes validation.
    pub fn apply(&self, venture: &str, remove: &str, add: &str) -> Result<Assignment, SwapError> {
        if !self.assignment.contains(remove, venture) {
            return Err(SwapError::NotAssigned { judge_id: remove.to_string(), venture_id: venture.to_string() });
        }
        let similarity = match (self.grid.judge_index(add), self.grid.venture_index(venture)) {
            (Some(j), Some(v)) => self.grid.similarity(j, v).unwrap_or(0.0),
            _ => 0.0,
        };
        let mut pairs: Vec<AssignedPair> = self
            .assignment
            .pairs
            .iter()
            .filter(|p| !(p.judge_id == remove && p.venture_id == venture))
            .cloned()
            .collect();
        pairs.push(AssignedPair { judge_id: add.to_string(), venture_id: venture.to_string(), similarity });
        let next = Assignment::from_pairs(pairs, Optimality::Edited);
        let violations = validate(&next, &self.grid, &self.constraints);
        if violations.is_empty() {
            Ok(next)
        } else {
            Err(SwapError::Violation(violations))
        }
    }

    /// Single commit point: version check, validation, audit append, then
    /// the in-memory update.
    pub fn commit(&mut self, req: &SwapRequest, actor: &str) -> Result<AuditEntry, ApiError> {
        if req.expected_version != self.version {
            return Err(SwapError::VersionConflict { expected: req.expected_version, current: self.version }.into());
        }
        let next = self.apply(&req.venture_id, &req.remove_judge_id, &req.add_judge_id)?;
        let entry = AuditEntry {
            version: self.version + 1,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            actor: actor.to_string(),
            venture_id: req.venture_id.clone(),
            remove_judge_id: req.remove_judge_id.clone(),
            add_judge_id: req.add_judge_id.clone(),
        };
        if let Some(path) = &self.audit_path {
            let line = serde_json::to_string(&entry).map_err(|e| ApiError::internal(e.to_string()))?;
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            writeln!(f, "{line}").map_err(|e| ApiError::internal(e.to_string()))?;
        }
        self.assignment = next;
        self.version = entry.version;
        Ok(entry)
    }

    pub fn view(&self) -> AssignmentView {
        AssignmentView {
            version: self.version,
            config_hash: self.config_hash.clone(),
            optimality: self.assignment.optimality,
            pairs: self.assignment.pairs.clone(),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: json!({ "error": code, "message": message.into() }) }
    }

    fn internal(message: String) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<SwapError> for ApiError {
    fn from(e: SwapError) -> Self {
        match e {
            SwapError::VersionConflict { expected, current } => ApiError {
                status: StatusCode::CONFLICT,
                body: json!({
                    "error": "version_conflict",
                    "expected_version": expected,
                    "current_version": current,
                }),
            },
            SwapError::NotAssigned { judge_id, venture_id } => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "not_assigned",
                format!("judge `{judge_id}` is not assigned to venture `{venture_id}`"),
            ),
            SwapError::Violation(violations) => ApiError {
                status: StatusCode::CONFLICT,
                body: json!({ "error": "violation", "violations": violations }),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Clone)]
pub struct AppState {
    pub review: Arc<RwLock<ReviewState>>,
    pub token: Option<String>,
}

impl AppState {
    pub fn new(review: ReviewState, token: Option<String>) -> Self {
        AppState { review: Arc::new(RwLock::new(review)), token }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn read(state: &AppState) -> std::sync::RwLockReadGuard<'_, ReviewState> {
    state.review.read().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug, Serialize)]
struct PanelMember {
    judge_id: String,
    similarity: f64,
}

#[derive(Debug, Serialize)]
struct VentureRow {
    venture_id: String,
    track: String,
    panel_size: usize,
    quality: f64,
    judges: Vec<PanelMember>,
}

async fn ventures(State(state): State<AppState>) -> ApiResult<Vec<VentureRow>> {
    let s = read(&state);
    let quality = s.assignment.venture_quality(&s.grid);
    let rows = s
        .grid
        .ventures
        .iter()
        .enumerate()
        .map(|(v, info)| VentureRow {
            venture_id: info.id.clone(),
            track: info.track.clone(),
            panel_size: s.grid.panel[v],
            quality: quality[&info.id],
            judges: s
                .assignment
                .judges_of(&info.id)
                .map(|p| PanelMember { judge_id: p.judge_id.clone(), similarity: p.similarity })
                .collect(),
        })
        .collect();
    Ok(Json(rows))
}

#[derive(Debug, Serialize)]
struct JudgeRow {
    judge_id: String,
    tracks: Vec<String>,
    load: usize,
    load_max: usize,
    ventures: Vec<String>,
}

async fn judges(State(state): State<AppState>) -> ApiResult<Vec<JudgeRow>> {
    let s = read(&state);
    let rows = s
        .grid
        .judges
        .iter()
        .map(|j| {
            let ventures: Vec<String> =
                s.assignment.pairs.iter().filter(|p| p.judge_id == j.id).map(|p| p.venture_id.clone()).collect();
            JudgeRow {
                judge_id: j.id.clone(),
                tracks: j.tracks.clone(),
                load: ventures.len(),
                load_max: s.constraints.judge_load_max,
                ventures,
            }
        })
        .collect();
    Ok(Json(rows))
}

async fn assignment(State(state): State<AppState>) -> ApiResult<AssignmentView> {
    Ok(Json(read(&state).view()))
}

#[derive(Debug, Deserialize)]
struct SimilarityQuery {
    judge: String,
    venture: String,
}

#[derive(Debug, Serialize)]
struct SimilarityCell {
    judge_id: String,
    venture_id: String,
    status: CellStatus,
    similarity: Option<f64>,
}

async fn similarity(State(state): State<AppState>, Query(q): Query<SimilarityQuery>) -> ApiResult<SimilarityCell> {
    let s = read(&state);
    let j = s.grid.judge_index(&q.judge).ok_or_else(|| unknown(&q.judge))?;
    let v = s.grid.venture_index(&q.venture).ok_or_else(|| unknown(&q.venture))?;
    Ok(Json(SimilarityCell {
        judge_id: q.judge,
        venture_id: q.venture,
        status: s.grid.status(j, v),
        similarity: s.grid.similarity(j, v),
    }))
}

fn unknown(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "unknown_id", format!("unknown id `{id}`"))
}

#[derive(Debug, Deserialize)]
struct SuggestionQuery {
    venture: String,
    removed: String,
    k: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Suggestions {
    version: u64,
    venture_id: String,
    removed_judge_id: String,
    candidates: Vec<Candidate>,
}

async fn suggestions(State(state): State<AppState>, Query(q): Query<SuggestionQuery>) -> ApiResult<Suggestions> {
    let s = read(&state);
    let k = q.k.unwrap_or(DEFAULT_SUGGESTIONS);
    let candidates = suggest_replacements(&s.assignment, &q.venture, &q.removed, k, &s.grid, &s.constraints)
        .map_err(|e| match e {
            judgematch::Error::UnknownId(id) => unknown(&id),
            e => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "not_assigned", e.to_string()),
        })?;
    Ok(Json(Suggestions { version: s.version, venture_id: q.venture, removed_judge_id: q.removed, candidates }))
}

#[derive(Debug, Serialize)]
struct ViolationList {
    version: u64,
    violations: Vec<Violation>,
}

async fn violations(State(state): State<AppState>) -> ApiResult<ViolationList> {
    let s = read(&state);
    Ok(Json(ViolationList { version: s.version, violations: validate(&s.assignment, &s.grid, &s.constraints) }))
}

#[derive(Debug, Serialize)]
struct ReportView {
    version: u64,
    config_hash: String,
    #[serde(flatten)]
    report: AssignmentReport,
}

async fn report(State(state): State<AppState>) -> ApiResult<ReportView> {
    let s = read(&state);
    Ok(Json(ReportView {
        version: s.version,
        config_hash: s.config_hash.clone(),
        report: assignment_report(&s.assignment, &s.grid, &s.constraints),
    }))
}

#[derive(Debug, Serialize)]
struct SwapResponse {
    version: u64,
    entry: AuditEntry,
}

async fn swap(State(state): State<AppState>, Json(req): Json<SwapRequest>) -> ApiResult<SwapResponse> {
    let actor = req.actor.clone().unwrap_or_else(|| "anonymous".into());
    let mut s = state.review.write().unwrap_or_else(|e| e.into_inner());
    let entry = s.commit(&req, &actor)?;
    log::info!("swap v{} by {}: {} {} -> {}", entry.version, actor, entry.venture_id, entry.remove_judge_id, entry.add_judge_id);
    Ok(Json(SwapResponse { version: entry.version, entry }))
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|h| h.to_str().ok())
            .and_then(|h| h.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/ventures", get(ventures))
        .route("/judges", get(judges))
        .route("/assignment", get(assignment))
        .route("/assignment/swap", post(swap))
        .route("/similarity", get(similarity))
        .route("/suggestions", get(suggestions))
        .route("/violations", get(violations))
        .route("/report", get(report))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Bind and serve until interrupted. `addr` falls back to `JUDGEMATCH_ADDR`,
/// then to [`DEFAULT_ADDR`].
pub async fn serve(out_dir: &Path, addr: Option<String>) -> ServiceResult<()> {
    let review = ReviewState::load(out_dir)?;
    let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
    let addr = addr.or_else(|| std::env::var(ADDR_ENV).ok()).unwrap_or_else(|| DEFAULT_ADDR.into());
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    log::info!("serving {} on {addr}", out_dir.display());
    axum::serve(listener, router(AppState::new(review, token))).await?;
    Ok(())
}
