//! JSON-over-HTTP trial conduct API.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use combodose::design::DESIGN_IDS;
use combodose::trial::CohortRecord;
use combodose::{Combo, DesignConfig, DoseGrid, PosteriorSummary, TrialConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::session::{Session, SessionError, Status, Store};

pub type AppState = Arc<Store>;

pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/api/designs", get(designs))
        .route("/api/trials", post(create))
        .route("/api/trials/{id}", get(fetch))
        .route("/api/trials/{id}/cohorts", post(cohort))
        .route("/api/trials/{id}/finalize", post(finalize))
        .with_state(store)
}

pub struct ApiError(StatusCode, String);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match e {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Conflict(_) => StatusCode::CONFLICT,
            SessionError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn invalid(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::UNPROCESSABLE_ENTITY, msg.into())
}

/// Runs session work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, SessionError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Serialize)]
struct DesignInfo {
    id: &'static str,
    defaults: DesignConfig,
}

async fn designs() -> Json<Vec<DesignInfo>> {
    Json(
        DESIGN_IDS
            .iter()
            .map(|id| DesignInfo {
                id,
                defaults: DesignConfig::default_for(id).expect("known id"),
            })
            .collect(),
    )
}

#[derive(Deserialize)]
pub struct CreateRequest {
    pub design: String,
    #[serde(default)]
    pub params: Option<Map<String, Value>>,
    #[serde(default)]
    pub cfg: Option<TrialConfig>,
    #[serde(default)]
    pub grid: Option<DoseGrid>,
}

#[derive(Serialize)]
struct Created {
    id: String,
    recommendation: Option<Combo>,
}

/// Design config from an id plus overrides of individual fields.
pub fn design_from(id: &str, params: Option<Map<String, Value>>) -> Result<DesignConfig, String> {
    let base = DesignConfig::default_for(id).map_err(|e| e.to_string())?;
    let Some(params) = params else {
        return Ok(base);
    };
    let mut value = serde_json::to_value(&base).map_err(|e| e.to_string())?;
    let obj = value.as_object_mut().expect("configs serialize as objects");
    for (k, v) in params {
        if k == "design" {
            continue;
        }
        obj.insert(k, v);
    }
    serde_json::from_value(value).map_err(|e| format!("invalid params: {e}"))
}

async fn create(State(store): State<AppState>, Json(req): Json<CreateRequest>) -> ApiResult<(StatusCode, Json<Created>)> {
    let design = design_from(&req.design, req.params).map_err(invalid)?;
    let cfg = req.cfg.unwrap_or_default();
    let grid = match req.grid {
        Some(g) => DoseGrid::new(g.doses_a().to_vec(), g.doses_b().to_vec()).map_err(|e| invalid(e.to_string()))?,
        None => DoseGrid::standard(),
    };
    let s = blocking(move || store.create(design, cfg, grid)).await?;
    Ok((
        StatusCode::CREATED,
        Json(Created {
            id: s.id,
            recommendation: s.recommendation,
        }),
    ))
}

async fn fetch(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Session>> {
    Ok(Json(blocking(move || store.get(&id)).await?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortRequest {
    pub combo: Combo,
    pub size: u32,
    pub dlts: u32,
    #[serde(default, rename = "override")]
    pub override_: bool,
}

#[derive(Serialize)]
struct CohortResponse {
    /// A combination, or the string "terminated".
    recommendation: Value,
    status: Status,
    posterior_summary: Option<PosteriorSummary>,
}

async fn cohort(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<CohortRequest>,
) -> ApiResult<Json<CohortResponse>> {
    let record = CohortRecord {
        combo: req.combo,
        size: req.size,
        dlts: req.dlts,
        overridden: req.override_,
    };
    let s = blocking(move || store.submit(&id, record)).await?;
    let recommendation = match (s.status, s.recommendation) {
        (Status::Terminated, _) => json!("terminated"),
        (_, rec) => json!(rec),
    };
    Ok(Json(CohortResponse {
        recommendation,
        status: s.status,
        posterior_summary: s.posterior,
    }))
}

#[derive(Serialize)]
struct Finalized {
    mtc: Option<Combo>,
}

async fn finalize(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Finalized>> {
    let s = blocking(move || store.finalize(&id)).await?;
    Ok(Json(Finalized { mtc: s.mtc }))
}
