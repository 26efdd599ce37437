use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::extract::rejection::JsonRejection;
use axum::routing::{get, post};
use axum::{Json, Router};
use hgml_core::api::{
    FieldError, Readout, RectangleList, ScoreResponse, SubmitResponse, TaskDescriptor,
    VerifyResponse,
};
use hgml_core::polygon::{judge, score_points, PolygonModel, Provenance, Verdict};
use hgml_core::store::ModelRecord;
use serde::Deserialize;

use crate::error::ApiError;
use crate::state::{token, AppState};

type Shared = Arc<AppState>;

pub fn api_router(state: Shared) -> Router {
    Router::new()
        .route("/task", get(get_task))
        .route("/task/{session}/rectangles", post(score_rectangles))
        .route("/task/{session}/submit", post(submit))
        .route("/codes/verify", get(verify_code))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
struct TaskQuery {
    worker: Option<String>,
}

async fn get_task(
    State(state): State<Shared>,
    Query(q): Query<TaskQuery>,
) -> Result<Json<TaskDescriptor>, ApiError> {
    let worker = q.worker.unwrap_or_else(|| "anonymous".into());
    let (session_id, pair, points) = state.open_session(worker)?;
    tracing::info!(%pair, "task issued");
    Ok(Json(TaskDescriptor {
        session_id,
        dataset: state.dataset.name().to_owned(),
        pair: state.pair_info(pair),
        points,
        threshold: state.settings.gate.threshold,
        min_coverage: state.settings.gate.min_coverage,
    }))
}

fn parse_body(body: Result<Json<RectangleList>, JsonRejection>) -> Result<RectangleList, ApiError> {
    match body {
        Ok(Json(list)) => Ok(list),
        Err(e) => Err(ApiError::Invalid(FieldError {
            error: e.body_text(),
            field: "rectangles".into(),
        })),
    }
}

async fn score_rectangles(
    State(state): State<Shared>,
    Path(session_id): Path<String>,
    body: Result<Json<RectangleList>, JsonRejection>,
) -> Result<Json<ScoreResponse>, ApiError> {
    let session = state.touch(&session_id)?;
    let rects = parse_body(body)?.to_rectangles().map_err(ApiError::Invalid)?;
    let score = score_points(&rects, &state.validation_points(&session));
    Ok(Json(ScoreResponse {
        validation_accuracy: Readout::from_accuracy(score.accuracy()),
        covered_fraction: score.covered_fraction(),
    }))
}

async fn submit(
    State(state): State<Shared>,
    Path(session_id): Path<String>,
    body: Result<Json<RectangleList>, JsonRejection>,
) -> Result<Json<SubmitResponse>, ApiError> {
    state.touch(&session_id)?;
    let rects = parse_body(body)?.to_rectangles().map_err(ApiError::Invalid)?;
    let session = state.begin_submit(&session_id)?;

    let outcome = finish(&state, &session_id, session, rects).await;
    state.finish_submit(&session_id, matches!(outcome, Ok(SubmitResponse::Accepted { .. })));
    outcome.map(Json)
}

async fn finish(
    state: &Shared,
    session_id: &str,
    session: crate::state::Session,
    rects: Vec<hgml_core::Rectangle>,
) -> Result<SubmitResponse, ApiError> {
    let gate = state.settings.gate;
    let reject = |reason, acc: Option<f64>, covered| SubmitResponse::Rejected {
        reason,
        validation_accuracy: Readout::from_accuracy(acc),
        covered_fraction: covered,
        threshold: gate.threshold,
    };
    if rects.is_empty() {
        return Ok(reject(hgml_core::polygon::RejectReason::NoCoverage, None, 0.0));
    }
    let model_id = format!("hum-{}", &token()[..16]);
    let mut model = PolygonModel::new(
        model_id.clone(),
        Provenance::Human {
            worker_id: session.worker_id.clone(),
        },
        session.pair,
        session.stats,
        rects,
    )
    .map_err(|e| ApiError::Invalid(FieldError {
        error: e.to_string(),
        field: "rectangles".into(),
    }))?;

    let (validation_accuracy, test_accuracy) =
        match judge(&model, &state.dataset, &state.split, gate) {
            Verdict::Accepted {
                validation_accuracy,
                test_accuracy,
                ..
            } => (validation_accuracy, test_accuracy),
            Verdict::Rejected {
                reason,
                validation_accuracy,
                covered_fraction,
            } => {
                tracing::info!(?reason, "submission rejected");
                return Ok(reject(reason, validation_accuracy, covered_fraction));
            }
        };
    model.validation_accuracy = Some(validation_accuracy);
    model.accuracy = Some(test_accuracy);

    let record = ModelRecord::new(state.dataset_hash.clone(), model);
    let store = state.store.clone();
    tokio::task::spawn_blocking(move || store.append(&record))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Internal(e.to_string()))?;

    let code = state.issue_code(session_id, &model_id);
    tracing::info!(%model_id, validation_accuracy, test_accuracy, "model accepted");
    Ok(SubmitResponse::Accepted {
        code,
        model_id,
        validation_accuracy,
    })
}

#[derive(Debug, Deserialize)]
struct VerifyQuery {
    code: String,
}

async fn verify_code(
    State(state): State<Shared>,
    Query(q): Query<VerifyQuery>,
) -> Json<VerifyResponse> {
    let body = match state.redeem(&q.code) {
        Some((model_id, false)) => VerifyResponse {
            valid: true,
            model_id: Some(model_id),
            already_used: false,
        },
        Some((model_id, true)) => VerifyResponse {
            valid: false,
            model_id: Some(model_id),
            already_used: true,
        },
        None => VerifyResponse {
            valid: false,
            model_id: None,
            already_used: false,
        },
    };
    Json(body)
}
