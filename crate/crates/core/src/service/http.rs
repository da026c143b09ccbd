use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Extension, Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use super::{ApiError, Platform};
use crate::registry::{Category, Filter};

#[derive(Clone)]
struct AppState {
    platform: Arc<Platform>,
    tokens: Arc<BTreeMap<String, String>>,
}

#[derive(Clone)]
struct UserId(String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[derive(Deserialize)]
pub struct SubmitBody {
    pub flag: String,
}

#[derive(Deserialize)]
pub struct CreateInstanceBody {
    pub challenge: String,
}

async fn authenticate(State(state): State<AppState>, mut req: Request, next: Next) -> Response {
    let user = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .and_then(|token| state.tokens.get(token.trim()))
        .cloned();
    match user {
        Some(user) => {
            req.extensions_mut().insert(UserId(user));
            next.run(req).await
        }
        None => ApiError::unauthorized().into_response(),
    }
}

/// Runs blocking platform work (disk syncs, driver calls) off the reactor.
async fn blocking<T, F>(platform: &Arc<Platform>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Platform) -> Result<T, ApiError> + Send + 'static,
{
    let platform = platform.clone();
    tokio::task::spawn_blocking(move || f(&platform))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

fn parse_filter(params: &HashMap<String, String>) -> Result<Filter, ApiError> {
    let get = |k: &str| params.get(k).map(String::as_str).filter(|v| !v.is_empty());
    Ok(Filter {
        event: get("event").map(str::to_string),
        year: get("year")
            .map(|y| y.parse().map_err(|_| ApiError::bad_request(format!("bad year `{y}`"))))
            .transpose()?,
        category: get("category")
            .map(|c| Category::parse(c).ok_or_else(|| ApiError::bad_request(format!("unknown category `{c}`"))))
            .transpose()?,
    })
}

async fn list_challenges(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let filter = parse_filter(&params)?;
    Ok(Json(state.platform.list_challenges(&filter)).into_response())
}

async fn challenge_detail(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(state.platform.challenge_detail(&id)?).into_response())
}

async fn artifact(
    State(state): State<AppState>,
    Path((id, path)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let file = state.platform.artifact_path(&id, &path)?;
    let bytes = tokio::fs::read(&file)
        .await
        .map_err(|_| ApiError::not_found(format!("artifact `{path}` is missing on disk")))?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, "application/octet-stream".parse().unwrap());
    let name = path.rsplit('/').next().unwrap_or(&path).replace('"', "");
    if let Ok(v) = format!("attachment; filename=\"{name}\"").parse() {
        headers.insert(header::CONTENT_DISPOSITION, v);
    }
    Ok((headers, bytes).into_response())
}

async fn submit(
    State(state): State<AppState>,
    Extension(UserId(user)): Extension<UserId>,
    Path(id): Path<String>,
    body: Result<Json<SubmitBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let resp = blocking(&state.platform, move |p| p.handle_submit(&user, &id, &body.flag)).await?;
    Ok(Json(resp).into_response())
}

async fn create_instance(
    State(state): State<AppState>,
    Extension(UserId(user)): Extension<UserId>,
    body: Result<Json<CreateInstanceBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let resp = blocking(&state.platform, move |p| p.handle_instance_create(&user, &body.challenge)).await?;
    Ok((StatusCode::CREATED, Json(resp)).into_response())
}

async fn delete_instance(
    State(state): State<AppState>,
    Extension(UserId(user)): Extension<UserId>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let resp = blocking(&state.platform, move |p| p.handle_instance_delete(&user, &id)).await?;
    Ok(Json(resp).into_response())
}

async fn stats(State(state): State<AppState>) -> Result<Response, ApiError> {
    let resp = blocking(&state.platform, |p| Ok(p.handle_stats())).await?;
    Ok(Json(resp).into_response())
}

async fn my_solves(
    State(state): State<AppState>,
    Extension(UserId(user)): Extension<UserId>,
) -> Result<Response, ApiError> {
    Ok(Json(state.platform.user_solves(&user)).into_response())
}

async fn api_not_found() -> ApiError {
    ApiError::not_found("no such route")
}

/// The full route table. `ui_dir`, when given, is served under `/`.
pub fn router(platform: Arc<Platform>, tokens: BTreeMap<String, String>, ui_dir: Option<PathBuf>) -> Router {
    let state = AppState {
        platform,
        tokens: Arc::new(tokens),
    };
    let api = Router::new()
        .route("/challenges", get(list_challenges))
        .route("/challenges/{id}", get(challenge_detail))
        .route("/challenges/{id}/artifacts/{*path}", get(artifact))
        .route("/challenges/{id}/submit", post(submit))
        .route("/instances", post(create_instance))
        .route("/instances/{id}", delete(delete_instance))
        .route("/stats/categories", get(stats))
        .route("/users/me/solves", get(my_solves))
        .fallback(api_not_found)
        .route_layer(middleware::from_fn_with_state(state.clone(), authenticate))
        .with_state(state);

    let app = Router::new().nest("/api", api);
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Serves `app` on an already-bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr).await
}
