//! HTTP + JSON session service for hand-tuning linear reward weights against
//! expert preferences, with TAC feedback in Alignment sessions only.
//!
//! Routes:
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | [`CreateSessionRequest`] |
//! | GET | `/sessions/{id}` | |
//! | POST | `/sessions/{id}/evaluate` | [`EvaluateRequest`] |
//! | GET | `/sessions/{id}/history` | |
//! | POST | `/sessions/{id}/train` | [`TrainRequest`] |
//! | GET | `/sessions/{id}/pairs` | |
//!
//! Failures answer with an [`ErrorBody`].

pub mod error;
pub mod model;
pub mod store;

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;

pub use error::{ErrorBody, ServiceError, ServiceResult};
pub use model::{
    Condition, CreateSessionRequest, EvaluateRequest, Iteration, IterationSummary, PairsResponse, SessionInfo,
    TrainRequest, TrainingRecord,
};
pub use store::{Session, Store};

/// JSON body extractor whose rejections use the service's error body.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ServiceError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(value) = Json::<T>::from_request(req, state).await?;
        Ok(ApiJson(value))
    }
}

type Shared = State<Arc<Store>>;

async fn create_session(
    State(store): Shared,
    ApiJson(req): ApiJson<CreateSessionRequest>,
) -> ServiceResult<(StatusCode, Json<SessionInfo>)> {
    let session = store.create(req)?;
    Ok((StatusCode::CREATED, Json(session.info().await)))
}

async fn get_session(State(store): Shared, Path(id): Path<String>) -> ServiceResult<Json<SessionInfo>> {
    Ok(Json(store.get(&id)?.info().await))
}

async fn evaluate(
    State(store): Shared,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<EvaluateRequest>,
) -> ServiceResult<Json<Iteration>> {
    Ok(Json(store.get(&id)?.evaluate(req.weights).await?))
}

async fn history(State(store): Shared, Path(id): Path<String>) -> ServiceResult<Json<Vec<IterationSummary>>> {
    Ok(Json(store.get(&id)?.history().await))
}

async fn train(
    State(store): Shared,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<TrainRequest>,
) -> ServiceResult<Json<TrainingRecord>> {
    Ok(Json(store.get(&id)?.train(req).await?))
}

async fn pairs(State(store): Shared, Path(id): Path<String>) -> ServiceResult<Json<PairsResponse>> {
    Ok(Json(store.get(&id)?.pairs()))
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/evaluate", post(evaluate))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/train", post(train))
        .route("/sessions/{id}/pairs", get(pairs))
        .fallback(|| async { ServiceError::bad_request("route_not_found", "no such route") })
        .with_state(store)
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve(
    listener: TcpListener,
    store: Arc<Store>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store)).with_graceful_shutdown(shutdown).await
}
