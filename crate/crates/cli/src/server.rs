//! Warm scoring service. Everything the handlers touch is loaded once and
//! shared read-only.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clickbait_core::app::{ScoreRequest, Scorer};
use clickbait_core::Error;
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

pub fn router(scorer: Arc<Scorer>) -> Router {
    Router::new()
        .route("/score", post(score))
        .route("/health", get(health))
        .route("/schema", get(schema))
        .layer(CorsLayer::permissive())
        .with_state(scorer)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(scorer: Arc<Scorer>, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(scorer))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn error(status: StatusCode, message: String, field: Option<String>) -> Response {
    let mut body = json!({ "error": message });
    if let Some(f) = field {
        body["field"] = Value::String(f);
    }
    (status, Json(body)).into_response()
}

/// `missing field `postText`` and friends name the field between backticks.
fn field_from_serde(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

async fn score(State(scorer): State<Arc<Scorer>>, body: Bytes) -> Response {
    let req: ScoreRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) if e.is_data() => {
            let msg = e.to_string();
            let field = field_from_serde(&msg);
            return error(StatusCode::UNPROCESSABLE_ENTITY, msg, field);
        }
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid JSON: {e}"), None),
    };
    let result = tokio::task::spawn_blocking(move || scorer.score(&req)).await;
    match result {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(Error::Validation { field, message })) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, format!("{field}: {message}"), Some(field))
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None),
    }
}

async fn health(State(scorer): State<Arc<Scorer>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "modelType": scorer.bundle.model_type(),
        "embeddingDim": scorer.table.dimension(),
    }))
}

async fn schema(State(scorer): State<Arc<Scorer>>) -> Json<Value> {
    Json(json!({
        "schema": scorer.bundle.schema,
        "modelType": scorer.bundle.model_type(),
        "metadata": scorer.bundle.metadata,
    }))
}
