//! Read-only JSON API over an [`AppState`].
//!
//! | Route | Response |
//! |-------|----------|
//! | `GET /api/search?q=&method=&limit=` | [`SearchResponse`] |
//! | `GET /api/images?words=&{score}_min=&{score}_max=` | [`BrowseResponse`] |
//! | `GET /api/image/{id}` | [`ImageDetail`] |
//! | `GET /api/meta` | [`Meta`] |
//!
//! Invalid requests get status 400 and unknown images or routes 404, both
//! with a body `{"error": "..."}`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::query::{BrowseFilter, QueryRequest, RequestError, SearchMethod};
use crate::state::{AppState, AUTOMATED_SCORE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub rank: usize,
    pub image_id: String,
    pub relevance: f64,
    /// Automated specificity when scores were loaded.
    pub specificity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub method: SearchMethod,
    /// Database size; `results` holds the first `limit` entries.
    pub total: usize,
    pub results: Vec<SearchHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSummary {
    pub id: String,
    pub reference: String,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrowseResponse {
    pub total: usize,
    pub images: Vec<ImageSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamView {
    pub beta0: f64,
    pub beta1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDetail {
    pub id: String,
    pub reference: String,
    pub descriptions: Vec<String>,
    pub scores: BTreeMap<String, f64>,
    /// LR params by method name, for the methods that have them.
    pub params: BTreeMap<String, ParamView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub name: String,
    pub size: usize,
    pub pool_size: usize,
    pub score_names: Vec<String>,
    pub methods: Vec<SearchMethod>,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
}

impl From<RequestError> for ApiError {
    fn from(e: RequestError) -> Self {
        ApiError::BadRequest(e.0)
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

type Params = Result<Query<HashMap<String, String>>, QueryRejection>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/search", get(search))
        .route("/api/images", get(browse))
        .route("/api/image/{id}", get(image))
        .route("/api/meta", get(meta))
        .fallback(|| async { ApiError::NotFound("no such route".into()) })
        .with_state(state)
}

/// The response `/api/search` gives for `request`.
pub fn search_response(
    state: &AppState,
    request: &QueryRequest,
) -> Result<SearchResponse, RequestError> {
    let ranking = state.rank(request)?;
    let total = ranking.entries.len();
    let results = ranking
        .entries
        .into_iter()
        .take(request.limit)
        .enumerate()
        .map(|(i, e)| SearchHit {
            rank: i + 1,
            specificity: state
                .scores(&e.image_id)
                .and_then(|s| s.get(AUTOMATED_SCORE))
                .copied(),
            image_id: e.image_id,
            relevance: e.relevance,
        })
        .collect();
    Ok(SearchResponse {
        query: request.text.clone(),
        method: request.method,
        total,
        results,
    })
}

async fn search(
    State(state): State<Arc<AppState>>,
    params: Params,
) -> Result<Json<SearchResponse>, ApiError> {
    let Query(params) = params?;
    let request = QueryRequest::from_params(&params)?;
    let response = tokio::task::spawn_blocking(move || search_response(&state, &request))
        .await
        .map_err(|e| ApiError::BadRequest(format!("search failed: {e}")))??;
    Ok(Json(response))
}

async fn browse(
    State(state): State<Arc<AppState>>,
    params: Params,
) -> Result<Json<BrowseResponse>, ApiError> {
    let Query(params) = params?;
    let filter = BrowseFilter::from_params(&params, state.score_names())?;
    let images: Vec<ImageSummary> = state
        .browse(&filter)
        .into_iter()
        .map(|img| ImageSummary {
            id: img.id.clone(),
            reference: img.reference.text.clone(),
            scores: state.scores(&img.id).cloned().unwrap_or_default(),
        })
        .collect();
    Ok(Json(BrowseResponse {
        total: images.len(),
        images,
    }))
}

async fn image(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<ImageDetail>, ApiError> {
    let img = state
        .dataset
        .image(&id)
        .ok_or_else(|| ApiError::NotFound(format!("no image `{id}`")))?;
    let params = [SearchMethod::Gt, SearchMethod::Pred]
        .into_iter()
        .filter_map(|m| {
            state.param_for(m, &id).map(|p| {
                (
                    m.to_string(),
                    ParamView {
                        beta0: p.beta0,
                        beta1: p.beta1,
                    },
                )
            })
        })
        .collect();
    Ok(Json(ImageDetail {
        id: img.id.clone(),
        reference: img.reference.text.clone(),
        descriptions: img.pool.iter().map(|d| d.text.clone()).collect(),
        scores: state.scores(&id).cloned().unwrap_or_default(),
        params,
    }))
}

async fn meta(State(state): State<Arc<AppState>>) -> Json<Meta> {
    Json(Meta {
        name: state.dataset.name.clone(),
        size: state.dataset.len(),
        pool_size: state.dataset.pool_size(),
        score_names: state.score_names().to_vec(),
        methods: state.methods(),
    })
}
